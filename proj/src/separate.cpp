#include "cmsep/separate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

namespace cmsep {

std::string to_string(Target t) {
  switch (t) {
    case Target::Tms: return "tms";
    case Target::Tcs: return "tcs";
    case Target::CirmCs: return "cirm-cs";
  }
  return "?";
}

Target parse_target(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "tms") return Target::Tms;
  if (l == "tcs") return Target::Tcs;
  if (l == "cirm-cs" || l == "cirm_cs" || l == "cirmcs") return Target::CirmCs;
  throw std::invalid_argument("unknown training target '" + s + "' (tms, tcs, cirm-cs)");
}

ModelSeparator::ModelSeparator(model::ModelConfig config, StftParams params, Target target,
                               std::uint64_t seed)
    : net_((params.validate(), config), seed), params_(params), target_(target), seed_(seed) {
  if (net_.config().freq_bins != params_.freq_bins())
    throw std::invalid_argument("model freq_bins " + std::to_string(net_.config().freq_bins) +
                                " does not match window " + std::to_string(params_.window_len));
}

std::pair<ComplexMask, ComplexMask> ModelSeparator::raw_outputs(
    const ComplexSpectrogram& mixture) const {
  if (!(mixture.params == params_))
    throw std::invalid_argument("mixture STFT parameters differ from the model's");
  const auto heads = net_.forward(model::spectrogram_tensor<float>(mixture));
  const float s = target_ == Target::CirmCs ? 1.0f : heads.input_scale;
  auto grid = [s](const ag::Tensor<float>& t) {
    Grid g = model::to_grid(t);
    if (s != 1.0f)
      for (float& v : g.data) v *= s;
    return g;
  };
  ComplexMask voice, acc;
  voice.real = grid(heads.voice_real);
  voice.imag = grid(heads.voice_imag);
  acc.real = grid(heads.acc_real);
  acc.imag = grid(heads.acc_imag);
  return {std::move(voice), std::move(acc)};
}

std::pair<ComplexSpectrogram, ComplexSpectrogram> ModelSeparator::separate(
    const ComplexSpectrogram& mixture) const {
  auto [voice, acc] = raw_outputs(mixture);
  switch (target_) {
    case Target::CirmCs:
      return {masking::apply_mask(voice, mixture), masking::apply_mask(acc, mixture)};
    case Target::Tcs: {
      ComplexSpectrogram v(mixture.bins(), mixture.frames(), params_);
      ComplexSpectrogram a(mixture.bins(), mixture.frames(), params_);
      v.real = std::move(voice.real);
      v.imag = std::move(voice.imag);
      a.real = std::move(acc.real);
      a.imag = std::move(acc.imag);
      return {std::move(v), std::move(a)};
    }
    case Target::Tms: {
      const Grid ph = dsp::phase(mixture);
      for (float& m : voice.real.data) m = std::max(m, 0.0f);
      for (float& m : acc.real.data) m = std::max(m, 0.0f);
      return {dsp::from_polar(voice.real, ph, params_), dsp::from_polar(acc.real, ph, params_)};
    }
  }
  throw std::logic_error("unhandled target");
}

Checkpoint ModelSeparator::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.metadata["format"] = "cmsep-model";
  ckpt.metadata["model_config"] = net_.config().to_text();
  ckpt.metadata["window_len"] = std::to_string(params_.window_len);
  ckpt.metadata["hop"] = std::to_string(params_.hop);
  ckpt.metadata["sample_rate"] = std::to_string(params_.sample_rate);
  ckpt.metadata["target"] = to_string(target_);
  ckpt.metadata["seed"] = std::to_string(seed_);
  store_parameters(ckpt, net_.parameters());
  return ckpt;
}

void ModelSeparator::save(const std::filesystem::path& path) const {
  save_checkpoint(to_checkpoint(), path);
}

std::unique_ptr<ModelSeparator> ModelSeparator::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.metadata.count("format") == 0 || ckpt.meta("format") != "cmsep-model")
    throw std::runtime_error("checkpoint is not a separation model");
  StftParams p;
  p.window_len = std::stoi(ckpt.meta("window_len"));
  p.hop = std::stoi(ckpt.meta("hop"));
  p.sample_rate = std::stoi(ckpt.meta("sample_rate"));
  auto sep = std::make_unique<ModelSeparator>(model::ModelConfig::from_text(ckpt.meta("model_config")),
                                              p, parse_target(ckpt.meta("target")),
                                              std::stoull(ckpt.meta("seed")));
  restore_parameters(ckpt, sep->net_.parameters());
  return sep;
}

std::unique_ptr<ModelSeparator> ModelSeparator::load(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

ChunkPlan plan_chunks(std::size_t samples, int sample_rate, const SeparationOptions& options) {
  if (!(options.chunk_seconds > 0.0) || options.overlap < 0.0 || options.overlap >= 1.0)
    throw std::invalid_argument("invalid chunking options");
  ChunkPlan plan;
  plan.chunk_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.chunk_seconds * sample_rate)));
  plan.hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(plan.chunk_len * (1.0 - options.overlap))));
  if (samples <= plan.chunk_len) {
    plan.count = 1;
  } else {
    plan.count = (samples - plan.chunk_len + plan.hop - 1) / plan.hop + 1;
  }
  return plan;
}

double crossfade_weight(std::size_t n, std::size_t chunk_len) {
  const double x = (static_cast<double>(n) + 0.5) / static_cast<double>(chunk_len);
  return 1.0 - std::abs(2.0 * x - 1.0);
}

std::pair<Waveform, Waveform> separate_song(const Waveform& wave,
                                            const SpectralSeparator& separator,
                                            const SeparationOptions& options) {
  const StftParams& params = separator.stft_params();
  if (wave.sample_rate != params.sample_rate)
    throw std::invalid_argument("song sample rate " + std::to_string(wave.sample_rate) +
                                " differs from the separator's " +
                                std::to_string(params.sample_rate));
  Waveform voice{std::vector<float>(wave.size(), 0.0f), wave.sample_rate};
  Waveform acc{std::vector<float>(wave.size(), 0.0f), wave.sample_rate};
  if (wave.empty()) return {voice, acc};

  const ChunkPlan plan = plan_chunks(wave.size(), wave.sample_rate, options);
  if (plan.chunk_len < static_cast<std::size_t>(params.hop))
    throw std::invalid_argument("chunk shorter than one STFT hop");

  std::vector<std::vector<float>> voice_chunks(plan.count), acc_chunks(plan.count);
  const auto count = static_cast<std::ptrdiff_t>(plan.count);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    try {
      const std::size_t start = static_cast<std::size_t>(c) * plan.hop;
      Waveform chunk{std::vector<float>(plan.chunk_len, 0.0f), wave.sample_rate};
      const std::size_t avail = std::min(plan.chunk_len, wave.size() - start);
      std::copy_n(wave.samples.begin() + static_cast<std::ptrdiff_t>(start), avail,
                  chunk.samples.begin());
      const auto spec = dsp::stft(chunk, params);
      const auto [v, a] = separator.separate(spec);
      voice_chunks[static_cast<std::size_t>(c)] = dsp::istft(v, plan.chunk_len).samples;
      acc_chunks[static_cast<std::size_t>(c)] = dsp::istft(a, plan.chunk_len).samples;
    } catch (...) {
#pragma omp critical(cmsep_separate_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> vsum(wave.size(), 0.0), asum(wave.size(), 0.0), wsum(wave.size(), 0.0);
  for (std::size_t c = 0; c < plan.count; ++c) {
    const std::size_t start = c * plan.hop;
    const std::size_t avail = std::min(plan.chunk_len, wave.size() - start);
    for (std::size_t n = 0; n < avail; ++n) {
      const double w = crossfade_weight(n, plan.chunk_len);
      vsum[start + n] += w * voice_chunks[c][n];
      asum[start + n] += w * acc_chunks[c][n];
      wsum[start + n] += w;
    }
  }
  for (std::size_t i = 0; i < wave.size(); ++i) {
    voice.samples[i] = static_cast<float>(vsum[i] / wsum[i]);
    acc.samples[i] = static_cast<float>(asum[i] / wsum[i]);
  }
  return {std::move(voice), std::move(acc)};
}

}  // namespace cmsep
