#include "cmsep/dsp.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unsupported/Eigen/FFT>

namespace cmsep {

void StftParams::validate() const {
  if (window_len < 16 || window_len % 2 != 0)
    throw std::invalid_argument("window_len must be even and >= 16, got " +
                                std::to_string(window_len));
  if (hop <= 0 || window_len % hop != 0)
    throw std::invalid_argument("hop " + std::to_string(hop) + " must divide window_len " +
                                std::to_string(window_len));
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
}

StftParams StftParams::from_ms(double window_ms, double shift_fraction, int sample_rate) {
  if (window_ms <= 0.0 || shift_fraction <= 0.0 || shift_fraction > 1.0)
    throw std::invalid_argument("invalid window/shift");
  StftParams p;
  p.sample_rate = sample_rate;
  p.window_len = static_cast<int>(std::lround(window_ms * 1e-3 * sample_rate / 2.0)) * 2;
  const int divisions = static_cast<int>(std::lround(1.0 / shift_fraction));
  p.hop = p.window_len / std::max(divisions, 1);
  // Snap to the nearest exact divisor below.
  while (p.hop > 1 && p.window_len % p.hop != 0) --p.hop;
  p.validate();
  return p;
}

namespace dsp {
namespace {

using Fft = Eigen::FFT<double>;

void check_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
  }
}

}  // namespace

std::vector<double> sqrt_hann(int window_len) {
  std::vector<double> w(static_cast<std::size_t>(window_len));
  for (int n = 0; n < window_len; ++n)
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * M_PI * n / window_len));
  return w;
}

std::size_t leading_pad(const StftParams& p) {
  return static_cast<std::size_t>(p.window_len - p.hop);
}

std::size_t frame_count(std::size_t samples, const StftParams& p) {
  const auto hop = static_cast<std::size_t>(p.hop);
  const std::size_t extra = (hop - samples % hop) % hop;
  return (samples + extra) / hop + static_cast<std::size_t>(p.overlap_factor()) - 1;
}

std::size_t max_signal_length(std::size_t frames, const StftParams& p) {
  const auto k = static_cast<std::size_t>(p.overlap_factor());
  if (frames + 1 < k) return 0;
  return (frames + 1 - k) * static_cast<std::size_t>(p.hop);
}

ComplexSpectrogram stft(const Waveform& wave, const StftParams& params) {
  params.validate();
  if (wave.size() < static_cast<std::size_t>(params.hop)) {
    throw std::invalid_argument("stft: signal has " + std::to_string(wave.size()) +
                                " samples, at least " + std::to_string(params.hop) +
                                " required (one hop)");
  }
  const std::size_t n = static_cast<std::size_t>(params.window_len);
  const std::size_t hop = static_cast<std::size_t>(params.hop);
  const std::size_t frames = frame_count(wave.size(), params);
  const std::size_t bins = static_cast<std::size_t>(params.freq_bins());
  const auto pad = static_cast<std::ptrdiff_t>(leading_pad(params));
  const auto window = sqrt_hann(params.window_len);
  const auto len = static_cast<std::ptrdiff_t>(wave.size());

  ComplexSpectrogram spec(bins, frames, params);
#pragma omp parallel
  {
    Fft fft;
    fft.SetFlag(Fft::HalfSpectrum);
    std::vector<double> frame(n);
    std::vector<std::complex<double>> out;
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < frames; ++t) {
      const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * hop) - pad;
      for (std::size_t i = 0; i < n; ++i) {
        const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
        frame[i] = (idx >= 0 && idx < len) ? window[i] * wave.samples[idx] : 0.0;
      }
      fft.fwd(out, frame);
      for (std::size_t f = 0; f < bins; ++f) {
        spec.real(f, t) = static_cast<float>(out[f].real());
        spec.imag(f, t) = static_cast<float>(out[f].imag());
      }
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec, std::optional<std::size_t> length) {
  const StftParams& params = spec.params;
  params.validate();
  check_shape(spec.real, spec.imag, "istft");
  if (spec.bins() != static_cast<std::size_t>(params.freq_bins())) {
    throw std::invalid_argument("istft: spectrogram has " + std::to_string(spec.bins()) +
                                " bins, window " + std::to_string(params.window_len) +
                                " implies " + std::to_string(params.freq_bins()));
  }
  const std::size_t n = static_cast<std::size_t>(params.window_len);
  const std::size_t hop = static_cast<std::size_t>(params.hop);
  const std::size_t frames = spec.frames();
  const std::size_t bins = spec.bins();
  const std::size_t pad = leading_pad(params);
  const std::size_t out_len = length.value_or(max_signal_length(frames, params));
  if (out_len > max_signal_length(frames, params)) {
    throw std::invalid_argument("istft: requested length " + std::to_string(out_len) +
                                " exceeds what " + std::to_string(frames) + " frames cover");
  }
  const auto window = sqrt_hann(params.window_len);

  // Each frame's inverse DFT is independent; overlap-add is serial.
  std::vector<double> frames_td(frames * n);
#pragma omp parallel
  {
    Fft fft;
    fft.SetFlag(Fft::HalfSpectrum);
    std::vector<std::complex<double>> in(bins);
    std::vector<double> out;
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) in[f] = {spec.real(f, t), spec.imag(f, t)};
      fft.inv(out, in, static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) frames_td[t * n + i] = out[i] * window[i];
    }
  }

  const std::size_t padded = frames == 0 ? 0 : (frames - 1) * hop + n;
  std::vector<double> acc(padded, 0.0), env(padded, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      acc[t * hop + i] += frames_td[t * n + i];
      env[t * hop + i] += window[i] * window[i];
    }
  }

  Waveform wave;
  wave.sample_rate = params.sample_rate;
  wave.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double e = env[pad + i];
    wave.samples[i] = e > 1e-10 ? static_cast<float>(acc[pad + i] / e) : 0.0f;
  }
  return wave;
}

Grid magnitude(const ComplexSpectrogram& spec) {
  check_shape(spec.real, spec.imag, "magnitude");
  Grid m(spec.bins(), spec.frames());
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data[i] = static_cast<float>(
        std::hypot(static_cast<double>(spec.real.data[i]), static_cast<double>(spec.imag.data[i])));
  return m;
}

Grid phase(const ComplexSpectrogram& spec) {
  check_shape(spec.real, spec.imag, "phase");
  Grid p(spec.bins(), spec.frames());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double a = std::atan2(static_cast<double>(spec.imag.data[i]),
                          static_cast<double>(spec.real.data[i]));
    if (a <= -M_PI) a = M_PI;
    p.data[i] = static_cast<float>(a);
  }
  return p;
}

ComplexSpectrogram from_polar(const Grid& mag, const Grid& ph, const StftParams& params) {
  check_shape(mag, ph, "from_polar");
  ComplexSpectrogram out(mag.rows, mag.cols, params);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const double m = mag.data[i];
    const double a = ph.data[i];
    out.real.data[i] = static_cast<float>(m * std::cos(a));
    out.imag.data[i] = static_cast<float>(m * std::sin(a));
  }
  return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated spectrogram");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_spectrogram(const ComplexSpectrogram& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write("CSPG", 4);
  put_u32(out, static_cast<std::uint32_t>(spec.bins()));
  put_u32(out, static_cast<std::uint32_t>(spec.frames()));
  put_u32(out, static_cast<std::uint32_t>(spec.params.window_len));
  put_u32(out, static_cast<std::uint32_t>(spec.params.hop));
  put_u32(out, static_cast<std::uint32_t>(spec.params.sample_rate));
  for (const Grid* g : {&spec.real, &spec.imag}) {
    for (float v : g->data) {
      std::uint32_t raw;
      std::memcpy(&raw, &v, sizeof raw);
      put_u32(out, raw);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ComplexSpectrogram load_spectrogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open spectrogram: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CSPG", 4) != 0)
    throw std::runtime_error("bad spectrogram magic: " + path.string());
  const std::uint32_t bins = get_u32(in);
  const std::uint32_t frames = get_u32(in);
  StftParams params;
  params.window_len = static_cast<int>(get_u32(in));
  params.hop = static_cast<int>(get_u32(in));
  params.sample_rate = static_cast<int>(get_u32(in));
  params.validate();
  if (bins != static_cast<std::uint32_t>(params.freq_bins()))
    throw std::runtime_error("spectrogram bin count does not match window length");
  ComplexSpectrogram spec(bins, frames, params);
  for (Grid* g : {&spec.real, &spec.imag}) {
    for (float& v : g->data) {
      const std::uint32_t raw = get_u32(in);
      std::memcpy(&v, &raw, sizeof v);
    }
  }
  return spec;
}

}  // namespace dsp
}  // namespace cmsep
