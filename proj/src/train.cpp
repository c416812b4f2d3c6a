#include "cmsep/train.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "cmsep/optim.hpp"

namespace cmsep::train {

void TrainConfig::validate() const {
  model.validate();
  stft.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (frames_per_example < 1) throw std::invalid_argument("frames_per_example must be >= 1");
  if (crops_per_song < 1) throw std::invalid_argument("crops_per_song must be >= 1");
  if (model.freq_bins != static_cast<int>(stft.freq_bins()))
    throw std::invalid_argument("model freq_bins " + std::to_string(model.freq_bins) +
                                " does not match window " + std::to_string(stft.window_len));
}

SongSpectra song_spectra(const dataset::LoadedEntry& entry, const StftParams& params) {
  return {entry.entry.id, dsp::stft(entry.mixture, params), dsp::stft(entry.voice, params),
          dsp::stft(entry.accompaniment, params)};
}

ComplexSpectrogram crop_frames(const ComplexSpectrogram& spec, std::size_t start,
                               std::size_t count) {
  if (start + count > spec.frames()) throw std::out_of_range("crop_frames past the end");
  ComplexSpectrogram out;
  out.params = spec.params;
  out.real = Grid(spec.bins(), count);
  out.imag = Grid(spec.bins(), count);
  for (std::size_t f = 0; f < spec.bins(); ++f)
    for (std::size_t t = 0; t < count; ++t) {
      out.real(f, t) = spec.real(f, start + t);
      out.imag(f, t) = spec.imag(f, start + t);
    }
  return out;
}

namespace {

ag::Tensor<float> loss_tensor(const ModelSeparator& sep, const SongSpectra& s) {
  auto heads = sep.net().forward(model::spectrogram_tensor<float>(s.mixture));
  switch (sep.target()) {
    case Target::CirmCs: return model::cirm_cs_loss(heads, s.mixture, s.voice, s.accompaniment);
    case Target::Tcs: return model::tcs_loss(heads, s.voice, s.accompaniment);
    case Target::Tms: return model::tms_loss(heads, s.voice, s.accompaniment);
  }
  throw std::logic_error("unknown target");
}

SongSpectra crop(const SongSpectra& s, std::size_t start, std::size_t count) {
  return {s.id, crop_frames(s.mixture, start, count), crop_frames(s.voice, start, count),
          crop_frames(s.accompaniment, start, count)};
}

void write_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# cmsep-trainlog v1\nepoch,train_loss,val_loss\n";
  out.precision(9);
  for (const auto& e : log) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
}

void save_model(const ModelSeparator& sep, const TrainConfig& c, int epoch,
                const std::filesystem::path& path) {
  Checkpoint ckpt = sep.to_checkpoint();
  ckpt.metadata["train.epoch"] = std::to_string(epoch);
  ckpt.metadata["train.lr"] = std::to_string(c.lr);
  ckpt.metadata["train.frames_per_example"] = std::to_string(c.frames_per_example);
  save_checkpoint(ckpt, path);
}

}  // namespace

double example_loss(const ModelSeparator& sep, const SongSpectra& song) {
  return static_cast<double>(loss_tensor(sep, song).item());
}

double validation_loss(const ModelSeparator& sep, const std::vector<SongSpectra>& songs,
                       int frames_per_example) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const auto& s : songs) {
    const std::size_t n = s.mixture.frames();
    for (std::size_t start = 0; start < n; start += frames_per_example) {
      const std::size_t count = std::min<std::size_t>(frames_per_example, n - start);
      total += example_loss(sep, crop(s, start, count)) * static_cast<double>(count);
      frames += count;
    }
  }
  return frames ? total / static_cast<double>(frames) : 0.0;
}

TrainResult train(const std::vector<SongSpectra>& train_set,
                  const std::vector<SongSpectra>& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  if (val_set.empty()) throw std::invalid_argument("validation split is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set)
      if (s.mixture.params.window_len != config.stft.window_len ||
          s.mixture.params.hop != config.stft.hop)
        throw std::invalid_argument("song " + s.id + " was analysed with different STFT params");

  std::filesystem::create_directories(config.checkpoint_dir);
  const auto best_path = config.checkpoint_dir / "best.ckpt";
  const auto log_path = config.checkpoint_dir / "train_log.csv";

  ModelSeparator sep(config.model, config.stft, config.target, config.seed);
  optim::Adam<float> adam(sep.net().parameter_tensors(), {.lr = config.lr});
  std::mt19937_64 rng(config.seed + 1);

  TrainResult result;
  result.best_checkpoint = best_path;
  result.initial_val_loss = config.epochs > 0 ? validation_loss(sep, val_set, config.frames_per_example) : 0.0;
  double best = result.initial_val_loss;
  save_model(sep, config, 0, best_path);

  std::int64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < train_set.size(); ++i)
      for (int k = 0; k < config.crops_per_song; ++k) order.push_back(i);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const SongSpectra& s = train_set[idx];
      const std::size_t n = s.mixture.frames();
      const std::size_t count = std::min<std::size_t>(config.frames_per_example, n);
      std::uniform_int_distribution<std::size_t> pick(0, n - count);
      const SongSpectra ex = crop(s, pick(rng), count);

      adam.zero_grad();
      auto loss = loss_tensor(sep, ex);
      const double value = loss.item();
      ++step;
      if (!std::isfinite(value))
        throw std::runtime_error("non-finite loss at step " + std::to_string(step));
      loss.backward();
      adam.step();
      result.step_losses.push_back(value);
      epoch_loss += value;
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = validation_loss(sep, val_set, config.frames_per_example);
    if (!std::isfinite(val))
      throw std::runtime_error("non-finite validation loss after step " + std::to_string(step));
    result.log.push_back({epoch, epoch_loss, val});
    if (val < best) {
      best = val;
      save_model(sep, config, epoch, best_path);
    }
    write_log(log_path, result.log);
  }
  write_log(log_path, result.log);
  return result;
}

TrainResult train(const dataset::Manifest& manifest, const TrainConfig& config) {
  auto load = [&](dataset::Split split) {
    std::vector<SongSpectra> out;
    for (const auto& e : manifest.split(split))
      out.push_back(song_spectra(dataset::load_entry(e, config.stft.sample_rate), config.stft));
    return out;
  };
  return train(load(dataset::Split::Train), load(dataset::Split::Val), config);
}

}  // namespace cmsep::train
