#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "cmsep/audio_io.hpp"

namespace cmsep {

struct StftParams {
  int window_len = 1024;
  int hop = 256;
  int sample_rate = 16000;

  int freq_bins() const { return window_len / 2 + 1; }
  int overlap_factor() const { return window_len / hop; }

  // Throws std::invalid_argument unless window_len is even and >= 16 and hop
  // divides it.
  void validate() const;

  // Window given in milliseconds, shift as a fraction of the window
  // (0.125, 0.25, 0.5 ...). The window is rounded to an even sample count and
  // the hop to a divisor of it.
  static StftParams from_ms(double window_ms, double shift_fraction, int sample_rate);

  friend bool operator==(const StftParams&, const StftParams&) = default;
};

// Row-major real grid, rows = frequency bins, cols = frames.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct ComplexSpectrogram {
  Grid real;
  Grid imag;
  StftParams params;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t bins, std::size_t frames, const StftParams& p)
      : real(bins, frames), imag(bins, frames), params(p) {}

  std::size_t bins() const { return real.rows; }
  std::size_t frames() const { return real.cols; }
  bool same_shape(const ComplexSpectrogram& o) const {
    return real.same_shape(o.real) && imag.same_shape(o.imag);
  }
};

namespace dsp {

// Periodic sqrt-Hann; used for both analysis and synthesis.
std::vector<double> sqrt_hann(int window_len);

// Zeros added before the signal (window_len - hop).
std::size_t leading_pad(const StftParams& p);
// Frame count for a signal of `samples` samples.
std::size_t frame_count(std::size_t samples, const StftParams& p);
// Signal length recoverable from `frames` frames, before trimming to a
// caller-known length.
std::size_t max_signal_length(std::size_t frames, const StftParams& p);

// One-sided STFT. The signal is zero padded by window_len - hop on the left,
// and on the right by the same amount plus whatever completes the last hop.
// Frame t covers padded samples [t*hop, t*hop + window_len).
ComplexSpectrogram stft(const Waveform& wave, const StftParams& params);

// Weighted overlap-add inverse, normalized by the summed squared window.
// Output is trimmed to `length` samples when given, otherwise to
// max_signal_length(frames).
Waveform istft(const ComplexSpectrogram& spec, std::optional<std::size_t> length = std::nullopt);

Grid magnitude(const ComplexSpectrogram& spec);
// atan2(imag, real) in (-pi, pi]; zero cells map to 0.
Grid phase(const ComplexSpectrogram& spec);
ComplexSpectrogram from_polar(const Grid& mag, const Grid& phase, const StftParams& params);

// Little-endian container: "CSPG", then u32 F, T, window_len, hop,
// sample_rate, then the float32 real grid and the float32 imag grid, both
// row-major.
void save_spectrogram(const ComplexSpectrogram& spec, const std::filesystem::path& path);
ComplexSpectrogram load_spectrogram(const std::filesystem::path& path);

}  // namespace dsp
}  // namespace cmsep
