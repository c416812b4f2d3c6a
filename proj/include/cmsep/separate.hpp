#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>

#include "cmsep/model.hpp"

namespace cmsep {

// What the network's heads are trained to produce.
enum class Target { Tms, Tcs, CirmCs };

std::string to_string(Target t);
Target parse_target(const std::string& s);

// Anything that maps a mixture spectrogram to (voice, accompaniment)
// spectrograms of the same shape.
class SpectralSeparator {
 public:
  virtual ~SpectralSeparator() = default;
  virtual std::pair<ComplexSpectrogram, ComplexSpectrogram> separate(
      const ComplexSpectrogram& mixture) const = 0;
  virtual const StftParams& stft_params() const = 0;
};

// A trained (or freshly initialized) complex SA-DenseUNet plus the STFT it
// was trained with.
class ModelSeparator final : public SpectralSeparator {
 public:
  ModelSeparator(model::ModelConfig config, StftParams params, Target target, std::uint64_t seed);

  std::pair<ComplexSpectrogram, ComplexSpectrogram> separate(
      const ComplexSpectrogram& mixture) const override;
  const StftParams& stft_params() const override { return params_; }

  // Spectrogram estimates plus the masks (for cIRM-CS) or raw heads.
  std::pair<ComplexMask, ComplexMask> raw_outputs(const ComplexSpectrogram& mixture) const;

  model::SADenseUNet<float>& net() { return net_; }
  const model::SADenseUNet<float>& net() const { return net_; }
  Target target() const { return target_; }
  std::uint64_t seed() const { return seed_; }

  Checkpoint to_checkpoint() const;
  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<ModelSeparator> from_checkpoint(const Checkpoint& ckpt);
  static std::unique_ptr<ModelSeparator> load(const std::filesystem::path& path);

 private:
  model::SADenseUNet<float> net_;
  StftParams params_;
  Target target_;
  std::uint64_t seed_;
};

// Test double: every cell of both outputs is the mixture (mask (1, 0)).
class IdentitySeparator final : public SpectralSeparator {
 public:
  explicit IdentitySeparator(StftParams params) : params_(params) {}
  std::pair<ComplexSpectrogram, ComplexSpectrogram> separate(
      const ComplexSpectrogram& mixture) const override {
    return {mixture, mixture};
  }
  const StftParams& stft_params() const override { return params_; }

 private:
  StftParams params_;
};

struct SeparationOptions {
  double chunk_seconds = 20.0;
  // Fraction of a chunk shared with the next one.
  double overlap = 0.75;
};

struct ChunkPlan {
  std::size_t chunk_len = 0;
  std::size_t hop = 0;
  std::size_t count = 0;
};

// Chunk starts are k * hop for k < count; the last chunk is zero padded past
// the end of the song. Songs no longer than one chunk give a single chunk.
ChunkPlan plan_chunks(std::size_t samples, int sample_rate, const SeparationOptions& options);

// Triangular cross-fade weight for position n of a chunk; strictly positive.
double crossfade_weight(std::size_t n, std::size_t chunk_len);

// Chunked separation: per chunk stft, separate, istft; chunks recombined by
// overlap-averaging with triangular weights normalized per sample. Output
// lengths equal the input length.
std::pair<Waveform, Waveform> separate_song(const Waveform& wave,
                                            const SpectralSeparator& separator,
                                            const SeparationOptions& options = {});

}  // namespace cmsep
