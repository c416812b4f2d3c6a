#include "cmsep/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cmsep::audio_io {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string wav_header(std::uint16_t format, std::uint16_t channels, int sample_rate,
                       std::uint16_t bits, std::uint32_t data_bytes) {
  std::string h;
  h += "RIFF";
  put32(h, 36 + data_bytes);
  h += "WAVE";
  h += "fmt ";
  put32(h, 16);
  put16(h, format);
  put16(h, channels);
  put32(h, static_cast<std::uint32_t>(sample_rate));
  put32(h, static_cast<std::uint32_t>(sample_rate) * channels * (bits / 8));
  put16(h, static_cast<std::uint16_t>(channels * (bits / 8)));
  put16(h, bits);
  h += "data";
  put32(h, data_bytes);
  return h;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size())
        throw std::runtime_error("truncated fmt chunk: " + path.string());
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && size >= 40) format = le16(chunk + 8 + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size())
        throw std::runtime_error("truncated data chunk: " + path.string() + " (declared " +
                                 std::to_string(size) + " bytes, " +
                                 std::to_string(bytes.size() - body) + " present)");
      data = bytes.data() + body;
      data_bytes = size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw std::runtime_error("missing fmt chunk: " + path.string());
  if (data == nullptr) throw std::runtime_error("missing data chunk: " + path.string());
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw std::runtime_error("unsupported wav encoding: format tag " + std::to_string(format) +
                             ", " + std::to_string(bits) + " bits");
  }
  if (channels != 1 && channels != 2)
    throw std::runtime_error("unsupported channel count " + std::to_string(channels));
  if (rate == 0) throw std::runtime_error("wav sample rate is zero");

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  if (data_bytes % frame_bytes != 0)
    throw std::runtime_error("truncated data chunk: partial frame in " + path.string());
  const std::size_t frames = data_bytes / frame_bytes;

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * (bits / 8);
      float v;
      if (pcm16) {
        v = static_cast<float>(static_cast<std::int16_t>(le16(p))) / 32768.0f;
      } else {
        const std::uint32_t raw = le32(p);
        std::memcpy(&v, &raw, sizeof v);
      }
      acc += v;
    }
    wave.samples[i] = channels == 1 ? acc : acc * 0.5f;
  }
  return wave;
}

void write_wav(const Waveform& wave, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    if (!std::isfinite(wave.samples[i]))
      throw std::invalid_argument("non-finite sample at index " + std::to_string(i));
  }
  if (wave.sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 4);
  std::string bytes = wav_header(kFormatFloat, 1, wave.sample_rate, 32, data_bytes);
  bytes.reserve(bytes.size() + data_bytes);
  for (float v : wave.samples) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, sizeof raw);
    put32(bytes, raw);
  }
  write_file(path, bytes);
}

void write_wav_pcm(const std::vector<std::vector<float>>& channels, int sample_rate,
                   int bits_per_sample, const std::filesystem::path& path) {
  if (channels.empty()) throw std::invalid_argument("no channels");
  if (bits_per_sample != 16 && bits_per_sample != 32)
    throw std::invalid_argument("bits_per_sample must be 16 or 32");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw std::invalid_argument("channel lengths differ");

  const auto nch = static_cast<std::uint16_t>(channels.size());
  const auto data_bytes =
      static_cast<std::uint32_t>(frames * nch * static_cast<std::size_t>(bits_per_sample / 8));
  std::string bytes = wav_header(bits_per_sample == 16 ? kFormatPcm : kFormatFloat, nch,
                                 sample_rate, static_cast<std::uint16_t>(bits_per_sample),
                                 data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& c : channels) {
      if (bits_per_sample == 16) {
        const double scaled = std::clamp(std::round(c[i] * 32768.0), -32768.0, 32767.0);
        put16(bytes, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
      } else {
        std::uint32_t raw;
        std::memcpy(&raw, &c[i], sizeof raw);
        put32(bytes, raw);
      }
    }
  }
  write_file(path, bytes);
}

namespace {

constexpr int kTapsPerPhase = 64;
// Kaiser shape parameter. Roughly 40 dB sidelobe suppression, which keeps
// the passband flat to 0.1 dB up to 0.8 of the output Nyquist.
constexpr double kKaiserBeta = 3.4;
constexpr std::size_t kMaxTableEntries = std::size_t{1} << 22;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Taps for fractional offset `frac` in [0, 1), covering input positions
// base - span/2 + 1 .. base + span/2; normalized to unit DC gain.
void phase_taps(double frac, double cutoff, int span, double* taps) {
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  const int half = span / 2;
  double sum = 0.0;
  for (int j = 0; j < span; ++j) {
    const double tau = static_cast<double>(j - half + 1) - frac;
    const double u = tau / half;
    double w = 0.0;
    if (std::abs(u) < 1.0) w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - u * u)) / norm;
    taps[j] = 2.0 * cutoff * sinc(2.0 * cutoff * tau) * w;
    sum += taps[j];
  }
  for (int j = 0; j < span; ++j) taps[j] /= sum;
}

}  // namespace

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("target rate must be positive");
  if (target_rate == wave.sample_rate) return wave;

  const std::int64_t src = wave.sample_rate;
  const std::int64_t g = std::gcd(src, static_cast<std::int64_t>(target_rate));
  const std::int64_t up = target_rate / g;
  const std::int64_t down = src / g;
  const double cutoff = 0.9 * 0.5 * static_cast<double>(std::min<std::int64_t>(src, target_rate)) /
                        static_cast<double>(src);
  // 64 taps at the lower rate, i.e. more input samples when decimating.
  int span = kTapsPerPhase;
  if (target_rate < src)
    span = 2 * static_cast<int>(std::ceil(0.5 * kTapsPerPhase * static_cast<double>(src) / target_rate));
  const int half = span / 2;

  const auto in_len = static_cast<std::int64_t>(wave.samples.size());
  const auto out_len = static_cast<std::int64_t>(
      std::llround(static_cast<double>(in_len) * target_rate / static_cast<double>(src)));

  std::vector<double> table;
  const bool tabulated = static_cast<std::size_t>(up) * span <= kMaxTableEntries;
  if (tabulated) {
    table.resize(static_cast<std::size_t>(up) * span);
    for (std::int64_t p = 0; p < up; ++p)
      phase_taps(static_cast<double>(p) / up, cutoff, span, table.data() + p * span);
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
#pragma omp parallel
  {
    std::vector<double> scratch(span);
#pragma omp for schedule(static)
    for (std::int64_t n = 0; n < out_len; ++n) {
      const std::int64_t pos = n * down;
      const std::int64_t base = pos / up;
      const std::int64_t phase = pos % up;
      const double* taps;
      if (tabulated) {
        taps = table.data() + phase * span;
      } else {
        phase_taps(static_cast<double>(phase) / up, cutoff, span, scratch.data());
        taps = scratch.data();
      }
      double acc = 0.0;
      for (int j = 0; j < span; ++j) {
        const std::int64_t i = base + j - half + 1;
        if (i >= 0 && i < in_len) acc += taps[j] * wave.samples[static_cast<std::size_t>(i)];
      }
      out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace cmsep::audio_io
