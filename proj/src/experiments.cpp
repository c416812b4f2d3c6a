#include "cmsep/experiments.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace cmsep::experiments {

namespace {

bool silent(const Waveform& w) {
  for (float v : w.samples)
    if (v != 0.0f) return false;
  return true;
}

// Scores the sources with non-silent references; silent ones get nullopt.
std::vector<std::optional<metrics::BssScores>> score_present(const std::vector<Waveform>& refs,
                                                             const std::vector<Waveform>& ests,
                                                             std::size_t filter_len) {
  std::vector<Waveform> r, e;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < refs.size(); ++i)
    if (!silent(refs[i])) {
      r.push_back(refs[i]);
      e.push_back(ests[i]);
      idx.push_back(i);
    }
  std::vector<std::optional<metrics::BssScores>> out(refs.size());
  if (r.empty()) return out;
  const auto scores = metrics::bss_eval(r, e, filter_len);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = scores[k];
  return out;
}

}  // namespace

std::vector<metrics::ScoreRow> evaluate(const dataset::Manifest& manifest,
                                        const std::filesystem::path& estimates_dir,
                                        const std::filesystem::path& csv,
                                        std::size_t filter_len) {
  const auto tests = manifest.split(dataset::Split::Test);
  if (tests.empty()) throw std::invalid_argument("manifest has no test entries");
  std::vector<metrics::ScoreRow> rows;
  for (const auto& e : tests) {
    std::vector<Waveform> refs = {audio_io::read_wav(e.voice), audio_io::read_wav(e.accompaniment)};
    std::vector<Waveform> ests;
    for (const char* name : kSources) {
      const auto path = estimates_dir / e.id / (std::string(name) + ".wav");
      if (!std::filesystem::exists(path))
        throw std::runtime_error("missing estimate: " + path.string());
      ests.push_back(audio_io::read_wav(path));
    }
    // score at the rate the estimates were produced at
    for (auto& r : refs)
      if (r.sample_rate != ests.front().sample_rate)
        r = audio_io::resample(r, ests.front().sample_rate);
    const auto scores = metrics::bss_eval(refs, ests, filter_len);
    for (std::size_t j = 0; j < 2; ++j) rows.push_back({e.id, kSources[j], scores[j]});
  }
  std::vector<metrics::ScoreRow> all = rows;
  for (auto& r : metrics::pooled_rows(rows)) all.push_back(r);
  if (!csv.empty()) {
    if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
    metrics::write_scores_csv(csv, all);
    auto side = csv;
    side.replace_filename(csv.stem().string() + "_by_source.csv");
    metrics::write_scores_csv(side, metrics::aggregate_rows(rows));
  }
  return all;
}

std::vector<PhaseOracleRow> phase_oracle_song(const dataset::LoadedEntry& song,
                                              const StftParams& params,
                                              const SpectralSeparator* separator,
                                              std::size_t filter_len) {
  const std::size_t len = song.mixture.size();
  const auto Y = dsp::stft(song.mixture, params);
  const ComplexSpectrogram clean[2] = {dsp::stft(song.voice, params),
                                       dsp::stft(song.accompaniment, params)};
  Grid mags[2];
  if (separator) {
    if (!(separator->stft_params() == params))
      throw std::invalid_argument("separator STFT params differ from the requested ones");
    auto [v, a] = separator->separate(Y);
    mags[0] = dsp::magnitude(v);
    mags[1] = dsp::magnitude(a);
  } else {
    mags[0] = dsp::magnitude(clean[0]);
    mags[1] = dsp::magnitude(clean[1]);
  }
  std::vector<Waveform> refs = {song.voice, song.accompaniment};
  std::vector<Waveform> mix_phase, clean_phase;
  for (int j = 0; j < 2; ++j) {
    mix_phase.push_back(masking::resynthesize_with_phase(mags[j], Y, len));
    clean_phase.push_back(masking::resynthesize_with_phase(mags[j], clean[j], len));
  }
  const auto a = score_present(refs, mix_phase, filter_len);
  const auto b = score_present(refs, clean_phase, filter_len);
  std::vector<PhaseOracleRow> rows;
  for (int j = 0; j < 2; ++j)
    if (a[j] && b[j]) rows.push_back({song.entry.id, kSources[j], a[j]->sdr, b[j]->sdr});
  return rows;
}

std::vector<PhaseOracleRow> phase_oracle(const dataset::Manifest& manifest,
                                         const StftParams& params,
                                         const SpectralSeparator* separator,
                                         std::size_t filter_len) {
  const auto tests = manifest.split(dataset::Split::Test);
  if (tests.empty()) throw std::invalid_argument("manifest has no test entries");
  std::vector<PhaseOracleRow> rows;
  for (const auto& e : tests) {
    for (const auto* p : {&e.voice, &e.accompaniment})
      if (!std::filesystem::exists(*p)) throw std::runtime_error("missing stem: " + p->string());
    for (auto& r : phase_oracle_song(dataset::load_entry(e, params.sample_rate), params,
                                     separator, filter_len))
      rows.push_back(std::move(r));
  }
  return rows;
}

void write_phase_oracle_csv(const std::filesystem::path& path,
                            const std::vector<PhaseOracleRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# cmsep-phase-oracle v1\n";
  out << "song_id,source,sdr_mixture_phase,sdr_clean_phase,difference\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& r : rows)
    out << r.song_id << ',' << r.source << ',' << r.sdr_mixture_phase << ','
        << r.sdr_clean_phase << ',' << r.difference() << '\n';
}

std::vector<PhaseEstimationRow> phase_estimation(const dataset::LoadedEntry& song,
                                                 const SpectralSeparator& separator,
                                                 std::size_t filter_len) {
  const std::size_t len = song.mixture.size();
  const auto Y = dsp::stft(song.mixture, separator.stft_params());
  auto [v, a] = separator.separate(Y);
  const ComplexSpectrogram est[2] = {std::move(v), std::move(a)};
  std::vector<Waveform> refs = {song.voice, song.accompaniment};
  std::vector<Waveform> with_est, with_mix;
  for (int j = 0; j < 2; ++j) {
    with_est.push_back(dsp::istft(est[j], len));
    with_mix.push_back(masking::resynthesize_with_phase(dsp::magnitude(est[j]), Y, len));
  }
  const auto s_est = metrics::bss_eval(refs, with_est, filter_len);
  const auto s_mix = metrics::bss_eval(refs, with_mix, filter_len);
  std::vector<PhaseEstimationRow> rows;
  for (int j = 0; j < 2; ++j) rows.push_back({kSources[j], s_est[j].sdr, s_mix[j].sdr});
  return rows;
}

std::vector<double> mixture_phase_oracle_sdr(const dataset::LoadedEntry& song,
                                             const StftParams& params, std::size_t filter_len) {
  auto rows = phase_oracle_song(song, params, nullptr, filter_len);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.sdr_mixture_phase);
  return out;
}

double roundtrip_error(const StftParams& params, double seconds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  Waveform w{std::vector<float>(static_cast<std::size_t>(seconds * params.sample_rate)),
             params.sample_rate};
  for (float& v : w.samples) v = noise(rng);
  const Waveform back = dsp::istft(dsp::stft(w, params), w.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = static_cast<double>(back.samples[i]) - w.samples[i];
    num += d * d;
    den += static_cast<double>(w.samples[i]) * w.samples[i];
  }
  return std::sqrt(num / den);
}

std::vector<GridCell> grid_experiment(const dataset::Manifest& manifest,
                                      const GridOptions& options) {
  const int sr = options.base.stft.sample_rate;
  std::vector<GridCell> cells;
  for (double w : options.window_ms)
    for (double s : options.shifts) {
      const StftParams p = StftParams::from_ms(w, s, sr);
      GridCell c;
      c.window_ms = w;
      c.shift = s;
      c.window_len = p.window_len;
      c.hop = p.hop;
      c.roundtrip_error = roundtrip_error(p, 2.0, 1234);
      if (!(c.roundtrip_error < 1e-6))
        throw std::runtime_error("STFT round trip fails for window " + std::to_string(p.window_len) +
                                 " hop " + std::to_string(p.hop));
      cells.push_back(c);
    }

  const auto tests = manifest.split(dataset::Split::Test);
  if (tests.empty()) throw std::invalid_argument("manifest has no test entries");
  std::vector<dataset::LoadedEntry> songs;
  for (const auto& e : tests) songs.push_back(dataset::load_entry(e, sr));

  for (auto& c : cells) {
    train::TrainConfig cfg = options.base;
    cfg.stft = {c.window_len, c.hop, sr};
    cfg.model.freq_bins = cfg.stft.freq_bins();
    cfg.checkpoint_dir = options.work_dir / ("w" + std::to_string(c.window_len) + "_h" +
                                             std::to_string(c.hop));
    const auto trained = train::train(manifest, cfg);
    const auto sep = ModelSeparator::load(trained.best_checkpoint);

    double sums[4] = {0, 0, 0, 0};
    for (const auto& song : songs) {
      auto [v, a] = separate_song(song.mixture, *sep, options.separation);
      std::vector<Waveform> refs = {song.voice, song.accompaniment};
      std::vector<Waveform> ests = {std::move(v), std::move(a)};
      const auto scores = metrics::bss_eval(refs, ests, options.filter_len);
      sums[0] += scores[0].sdr;
      sums[1] += scores[1].sdr;
      const auto oracle = mixture_phase_oracle_sdr(song, cfg.stft, options.filter_len);
      sums[2] += oracle.at(0);
      sums[3] += oracle.at(1);
    }
    const double n = static_cast<double>(songs.size());
    c.voice_sdr = sums[0] / n;
    c.acc_sdr = sums[1] / n;
    c.oracle_voice_sdr = sums[2] / n;
    c.oracle_acc_sdr = sums[3] / n;
  }
  return cells;
}

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridCell>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# cmsep-grid v1\n";
  out << "window_ms,shift,window_len,hop,roundtrip_error,voice_sdr,acc_sdr,"
         "oracle_voice_sdr,oracle_acc_sdr\n";
  for (const auto& c : cells) {
    out << c.window_ms << ',' << c.shift << ',' << c.window_len << ',' << c.hop << ','
        << c.roundtrip_error << ',';
    out.setf(std::ios::fixed);
    out.precision(4);
    out << c.voice_sdr << ',' << c.acc_sdr << ',' << c.oracle_voice_sdr << ','
        << c.oracle_acc_sdr << '\n';
    out.unsetf(std::ios::fixed);
    out.precision(6);
  }
}

}  // namespace cmsep::experiments
