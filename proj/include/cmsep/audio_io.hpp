#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace cmsep {

// Mono time-domain signal. Every stage downstream of reading works on these.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

namespace audio_io {

// Reads RIFF/WAVE (PCM16 or float32, mono or stereo). Stereo is averaged to
// mono, PCM16 is scaled by 1/32768. Throws std::runtime_error on bad input.
Waveform read_wav(const std::filesystem::path& path);

// Always writes mono float32 (format tag 3). Rejects non-finite samples.
void write_wav(const Waveform& wave, const std::filesystem::path& path);

// Writes 16-bit or float32 PCM with the given interleaved channels. Used to
// produce test fixtures for the reader; the pipeline itself only emits mono
// float32.
void write_wav_pcm(const std::vector<std::vector<float>>& channels, int sample_rate,
                   int bits_per_sample, const std::filesystem::path& path);

// Kaiser-windowed sinc polyphase resampler. 64 taps per phase counted at
// the lower of the two rates, cutoff at 0.9 of the lower Nyquist frequency. Output length is
// round(len * target / source).
Waveform resample(const Waveform& wave, int target_rate);

}  // namespace audio_io
}  // namespace cmsep
