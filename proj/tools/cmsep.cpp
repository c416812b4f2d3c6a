// Command-line front end. Every subcommand exits 0 on success and 1 with a
// message on stderr otherwise.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cmsep/checkpoint.hpp"
#include "cmsep/dataset.hpp"
#include "cmsep/ensemble.hpp"
#include "cmsep/experiments.hpp"
#include "cmsep/separate.hpp"
#include "cmsep/train.hpp"

using namespace cmsep;
namespace fs = std::filesystem;

namespace {

struct StftFlags {
  int window_len = 0;
  int hop = 0;
  double window_ms = 64.0;
  double shift = 0.125;
  int sample_rate = 16000;

  void add(CLI::App* app) {
    app->add_option("--window-len", window_len, "Window in samples (overrides --window-ms)");
    app->add_option("--hop", hop, "Hop in samples (with --window-len)");
    app->add_option("--window-ms", window_ms, "Window length in milliseconds")->capture_default_str();
    app->add_option("--shift", shift, "Hop as a fraction of the window")->capture_default_str();
    app->add_option("--sample-rate", sample_rate, "Processing sample rate")->capture_default_str();
  }
  StftParams get() const {
    StftParams p;
    if (window_len > 0) {
      p = {window_len, hop > 0 ? hop : window_len / 8, sample_rate};
    } else {
      p = StftParams::from_ms(window_ms, shift, sample_rate);
    }
    p.validate();
    return p;
  }
};

struct TrainFlags {
  StftFlags stft;
  fs::path model_config;
  std::string target = "cirm-cs";
  double lr = 5e-5;
  int epochs = 35;
  int frames = 1250;
  int crops = 1;
  std::uint64_t seed = 0;
  std::optional<int> growth, num_down, reorg, layers;
  fs::path out_dir = "checkpoints";

  void add(CLI::App* app) {
    stft.add(app);
    app->add_option("--model-config", model_config, "Architecture file (key = value)");
    app->add_option("--target", target, "tms | tcs | cirm-cs")->capture_default_str();
    app->add_option("--lr", lr, "ADAM learning rate")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--frames", frames, "Frames per training excerpt")->capture_default_str();
    app->add_option("--crops-per-song", crops, "Excerpts per entry per epoch")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--growth", growth, "Override growth channels");
    app->add_option("--num-down", num_down, "Override down/up sampling depth");
    app->add_option("--reorg-channels", reorg, "Override reorganization width");
    app->add_option("--layers-per-block", layers, "Override dense-block depth");
    app->add_option("--out-dir", out_dir, "Checkpoint directory")->capture_default_str();
  }
  train::TrainConfig get() const {
    train::TrainConfig c;
    c.stft = stft.get();
    if (!model_config.empty()) c.model = model::ModelConfig::load(model_config);
    if (growth) c.model.growth = *growth;
    if (num_down) {
      c.model.num_down = c.model.num_up = *num_down;
      c.model.num_dense_blocks = 2 * *num_down + 1;
    }
    if (reorg) c.model.reorg_channels = *reorg;
    if (layers) c.model.layers_per_block = *layers;
    c.model.freq_bins = c.stft.freq_bins();
    c.target = parse_target(target);
    c.lr = lr;
    c.epochs = epochs;
    c.frames_per_example = frames;
    c.crops_per_song = crops;
    c.seed = seed;
    c.checkpoint_dir = out_dir;
    c.validate();
    return c;
  }
};

void write_pair(const std::pair<Waveform, Waveform>& out, const fs::path& dir) {
  fs::create_directories(dir);
  audio_io::write_wav(out.first, dir / "voice.wav");
  audio_io::write_wav(out.second, dir / "acc.wav");
  std::cout << (dir / "voice.wav").string() << '\n' << (dir / "acc.wav").string() << '\n';
}

Waveform read_at(const fs::path& path, int rate) {
  return audio_io::resample(audio_io::read_wav(path), rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-mask singing voice separation"};
  app.require_subcommand(1);

  // make-dataset
  auto* mk = app.add_subcommand("make-dataset", "Build a mixture manifest from stems or synthesis");
  fs::path mk_out, mk_stems;
  int mk_songs = 2, mk_rate = 16000, mk_aug = 0, mk_val = 0, mk_test = 0;
  double mk_seconds = 10.0;
  std::uint64_t mk_seed = 0;
  std::optional<double> mk_snr;
  double mk_gmin = 0.25, mk_gmax = 1.25;
  bool mk_no_remix = false;
  mk->add_option("--out", mk_out, "Output directory")->required();
  mk->add_option("--stems", mk_stems, "Directory of <song>/voice.wav + accompaniment.wav");
  mk->add_option("--synthetic-songs", mk_songs, "Synthetic song count")->capture_default_str();
  mk->add_option("--seconds", mk_seconds, "Synthetic song length")->capture_default_str();
  mk->add_option("--sample-rate", mk_rate)->capture_default_str();
  mk->add_option("--seed", mk_seed)->capture_default_str();
  mk->add_option("--augment", mk_aug, "Augmented copies per training song")->capture_default_str();
  mk->add_option("--val-songs", mk_val)->capture_default_str();
  mk->add_option("--test-songs", mk_test)->capture_default_str();
  mk->add_option("--snr-db", mk_snr, "Rescale every voice to this SNR");
  mk->add_option("--gain-min", mk_gmin)->capture_default_str();
  mk->add_option("--gain-max", mk_gmax)->capture_default_str();
  mk->add_flag("--no-remix", mk_no_remix, "Disable cross-song accompaniment remixing");

  // train
  auto* tr = app.add_subcommand("train", "Train one model; prints the best checkpoint path");
  fs::path tr_manifest;
  TrainFlags tr_flags;
  tr->add_option("--manifest", tr_manifest)->required();
  tr_flags.add(tr);

  // separate
  auto* sp = app.add_subcommand("separate", "Separate a wav (or a manifest split) with a checkpoint");
  fs::path sp_ckpt, sp_input, sp_out, sp_manifest;
  std::string sp_split = "test";
  SeparationOptions sp_opts;
  sp->add_option("--checkpoint", sp_ckpt)->required();
  auto* sp_in = sp->add_option("--input", sp_input, "Input wav");
  sp->add_option("--manifest", sp_manifest, "Separate every entry of --split instead")
      ->excludes(sp_in);
  sp->add_option("--split", sp_split)->capture_default_str();
  sp->add_option("--out-dir", sp_out)->required();
  sp->add_option("--chunk-seconds", sp_opts.chunk_seconds)->capture_default_str();
  sp->add_option("--overlap", sp_opts.overlap)->capture_default_str();

  // ensemble-separate
  auto* es = app.add_subcommand("ensemble-separate", "Multi-context averaging over members");
  fs::path es_spec, es_input, es_out, es_manifest;
  std::string es_split = "test";
  SeparationOptions es_opts;
  es->add_option("--spec", es_spec, "Ensemble file")->required();
  auto* es_in = es->add_option("--input", es_input);
  es->add_option("--manifest", es_manifest)->excludes(es_in);
  es->add_option("--split", es_split)->capture_default_str();
  es->add_option("--out-dir", es_out)->required();
  es->add_option("--chunk-seconds", es_opts.chunk_seconds)->capture_default_str();
  es->add_option("--overlap", es_opts.overlap)->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "BSS-Eval scores for the test split");
  fs::path ev_manifest, ev_est, ev_csv;
  std::size_t ev_filter = metrics::kDefaultFilterLen;
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--estimates", ev_est, "Directory of <id>/voice.wav, <id>/acc.wav")->required();
  ev->add_option("--out", ev_csv, "CSV path")->required();
  ev->add_option("--filter-len", ev_filter)->capture_default_str();

  // phase-oracle
  auto* po = app.add_subcommand("phase-oracle", "Mixture phase versus clean phase");
  fs::path po_manifest, po_ckpt, po_csv;
  bool po_oracle = false;
  std::size_t po_filter = metrics::kDefaultFilterLen;
  StftFlags po_stft;
  po->add_option("--manifest", po_manifest)->required();
  auto* po_ck = po->add_option("--checkpoint", po_ckpt, "Model supplying magnitudes");
  po->add_flag("--oracle", po_oracle, "Use clean magnitudes")->excludes(po_ck);
  po->add_option("--out", po_csv)->required();
  po->add_option("--filter-len", po_filter)->capture_default_str();
  po_stft.add(po);

  // grid
  auto* gr = app.add_subcommand("grid", "Window length x frame shift grid");
  fs::path gr_manifest, gr_csv;
  TrainFlags gr_flags;
  experiments::GridOptions gr_opts;
  gr->add_option("--manifest", gr_manifest)->required();
  gr->add_option("--out", gr_csv)->required();
  gr->add_option("--windows-ms", gr_opts.window_ms)->capture_default_str();
  gr->add_option("--shifts", gr_opts.shifts)->capture_default_str();
  gr->add_option("--filter-len", gr_opts.filter_len)->capture_default_str();
  gr->add_option("--chunk-seconds", gr_opts.separation.chunk_seconds)->capture_default_str();
  gr_flags.add(gr);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mk) {
      std::vector<dataset::Song> songs;
      if (!mk_stems.empty()) {
        songs = dataset::load_stems(mk_stems, mk_rate);
      } else {
        if (mk_songs < 1) throw std::invalid_argument("--synthetic-songs must be >= 1");
        for (int i = 0; i < mk_songs; ++i)
          songs.push_back(dataset::synthesize_song(i, mk_seconds, mk_rate, mk_seed));
      }
      dataset::BuildOptions o;
      o.seed = mk_seed;
      o.augment_factor = mk_aug;
      o.val_songs = mk_val;
      o.test_songs = mk_test;
      o.target_snr_db = mk_snr;
      o.ranges = {mk_gmin, mk_gmax, !mk_no_remix};
      const auto m = dataset::make_dataset(songs, mk_out, o);
      std::cout << (mk_out / "manifest.jsonl").string() << " (" << m.entries.size()
                << " entries)\n";
    } else if (*tr) {
      const auto cfg = tr_flags.get();
      const auto result = train::train(dataset::Manifest::load(tr_manifest), cfg);
      std::cout << result.best_checkpoint.string() << '\n';
    } else if (*sp) {
      const auto sep = ModelSeparator::load(sp_ckpt);
      const int rate = sep->stft_params().sample_rate;
      if (!sp_manifest.empty()) {
        const auto m = dataset::Manifest::load(sp_manifest);
        for (const auto& e : m.split(dataset::parse_split(sp_split)))
          write_pair(separate_song(read_at(e.mixture, rate), *sep, sp_opts), sp_out / e.id);
      } else {
        if (sp_input.empty()) throw std::invalid_argument("separate needs --input or --manifest");
        write_pair(separate_song(read_at(sp_input, rate), *sep, sp_opts), sp_out);
      }
    } else if (*es) {
      const auto spec = ensemble::EnsembleSpec::load(es_spec);
      if (spec.members.empty()) throw std::invalid_argument("ensemble has no members");
      // the spec file carries no rate; the checkpoints were trained at one
      const int rate =
          std::stoi(load_checkpoint(spec.members.front().checkpoint).meta("sample_rate"));
      if (!es_manifest.empty()) {
        const auto m = dataset::Manifest::load(es_manifest);
        for (const auto& e : m.split(dataset::parse_split(es_split)))
          write_pair(ensemble::run_ensemble(read_at(e.mixture, rate), spec, es_opts), es_out / e.id);
      } else {
        if (es_input.empty()) throw std::invalid_argument("ensemble-separate needs --input or --manifest");
        write_pair(ensemble::run_ensemble(read_at(es_input, rate), spec, es_opts), es_out);
      }
    } else if (*ev) {
      const auto rows = experiments::evaluate(dataset::Manifest::load(ev_manifest), ev_est, ev_csv,
                                              ev_filter);
      for (const auto& r : rows)
        if (r.song_id == "mean" || r.song_id == "median")
          std::printf("%s SDR %.3f SIR %.3f SAR %.3f\n", r.song_id.c_str(), r.scores.sdr,
                      r.scores.sir, r.scores.sar);
    } else if (*po) {
      std::unique_ptr<ModelSeparator> sep;
      StftParams params;
      if (!po_ckpt.empty()) {
        sep = ModelSeparator::load(po_ckpt);
        params = sep->stft_params();
      } else if (po_oracle) {
        params = po_stft.get();
      } else {
        throw std::invalid_argument("phase-oracle needs --checkpoint or --oracle");
      }
      const auto rows =
          experiments::phase_oracle(dataset::Manifest::load(po_manifest), params, sep.get(), po_filter);
      experiments::write_phase_oracle_csv(po_csv, rows);
      double gap = 0.0;
      for (const auto& r : rows) gap += r.difference();
      std::printf("%zu rows, mean clean-minus-mixture phase SDR %.3f dB\n", rows.size(),
                  rows.empty() ? 0.0 : gap / static_cast<double>(rows.size()));
    } else if (*gr) {
      gr_opts.base = gr_flags.get();
      gr_opts.work_dir = gr_flags.out_dir;
      const auto cells = experiments::grid_experiment(dataset::Manifest::load(gr_manifest), gr_opts);
      experiments::write_grid_csv(gr_csv, cells);
      std::cout << gr_csv.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
