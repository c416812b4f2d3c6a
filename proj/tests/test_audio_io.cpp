#include <cstring>
#include <fstream>

#include "cmsep/audio_io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmsep;

namespace {

// Hand-assembled RIFF file, independent of the library writer.
std::string riff(std::uint16_t tag, std::uint16_t channels, std::uint32_t rate,
                 std::uint16_t bits, const std::string& data) {
  auto u32 = [](std::uint32_t v) { return std::string(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [](std::uint16_t v) { return std::string(reinterpret_cast<const char*>(&v), 2); };
  const std::uint16_t align = channels * bits / 8;
  std::string fmt = u16(tag) + u16(channels) + u32(rate) + u32(rate * align) + u16(align) + u16(bits);
  std::string body = "WAVE" + std::string("fmt ") + u32(16) + fmt + "data" +
                     u32(static_cast<std::uint32_t>(data.size())) + data;
  return "RIFF" + u32(static_cast<std::uint32_t>(body.size())) + body;
}

void dump(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string pcm16(std::initializer_list<std::int16_t> v) {
  std::string s;
  for (auto x : v) s.append(reinterpret_cast<const char*>(&x), 2);
  return s;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("pcm16 samples scale by 1/32768") {
  testing::TempDir dir;
  dump(dir / "a.wav", riff(1, 1, 16000, 16, pcm16({0, 16384, -32768})));
  const auto w = audio_io::read_wav(dir / "a.wav");
  CHECK(w.sample_rate == 16000);
  REQUIRE(w.size() == 3);
  CHECK(w.samples[0] == 0.0f);
  CHECK(w.samples[1] == 0.5f);
  CHECK(w.samples[2] == -1.0f);
}

TEST_CASE("stereo is averaged") {
  testing::TempDir dir;
  std::vector<float> l(100, 1.0f), r(100, 0.0f);
  audio_io::write_wav_pcm({l, r}, 8000, 32, dir / "s.wav");
  const auto w = audio_io::read_wav(dir / "s.wav");
  CHECK(w.size() == 100);
  for (float v : w.samples) CHECK(v == 0.5f);
}

TEST_CASE("downmix is linear in the channels") {
  testing::TempDir dir;
  const auto a = testing::noise(500, 16000, 1);
  const auto b = testing::noise(500, 16000, 2);
  audio_io::write_wav_pcm({a.samples, b.samples}, 16000, 32, dir / "st.wav");
  audio_io::write_wav(a, dir / "a.wav");
  audio_io::write_wav(b, dir / "b.wav");
  const auto st = audio_io::read_wav(dir / "st.wav");
  const auto ra = audio_io::read_wav(dir / "a.wav");
  const auto rb = audio_io::read_wav(dir / "b.wav");
  for (std::size_t i = 0; i < st.size(); ++i)
    CHECK(st.samples[i] == doctest::Approx((ra.samples[i] + rb.samples[i]) / 2.0).epsilon(1e-6));
}

TEST_CASE("float32 round trip is exact") {
  testing::TempDir dir;
  SUBCASE("440 Hz sine") {
    const auto w = testing::sine(440.0, 1.0, 16000);
    audio_io::write_wav(w, dir / "sine.wav");
    CHECK(audio_io::read_wav(dir / "sine.wav") == w);
  }
  SUBCASE("random 1000 samples") {
    const auto w = testing::noise(1000, 22050, 7);
    audio_io::write_wav(w, dir / "n.wav");
    CHECK(audio_io::read_wav(dir / "n.wav") == w);
  }
  SUBCASE("empty waveform") {
    Waveform w{{}, 16000};
    audio_io::write_wav(w, dir / "e.wav");
    const auto r = audio_io::read_wav(dir / "e.wav");
    CHECK(r.empty());
    CHECK(r.sample_rate == 16000);
  }
}

TEST_CASE("single sample encodes as float32 data") {
  testing::TempDir dir;
  audio_io::write_wav(Waveform{{0.25f}, 16000}, dir / "one.wav");
  const auto bytes = read_all(dir / "one.wav");
  const auto pos = bytes.find("data");
  REQUIRE(pos != std::string::npos);
  std::uint32_t size;
  std::memcpy(&size, bytes.data() + pos + 4, 4);
  CHECK(size == 4);
  float v;
  std::memcpy(&v, bytes.data() + pos + 8, 4);
  CHECK(v == 0.25f);
  std::uint16_t tag;
  std::memcpy(&tag, bytes.data() + bytes.find("fmt ") + 8, 2);
  CHECK(tag == 3);
}

TEST_CASE("reader errors") {
  testing::TempDir dir;
  CHECK_THROWS(audio_io::read_wav(dir / "missing.wav"));

  dump(dir / "adpcm.wav", riff(2, 1, 8000, 4, std::string(8, '\0')));
  try {
    audio_io::read_wav(dir / "adpcm.wav");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }

  dump(dir / "pcm24.wav", riff(1, 1, 8000, 24, std::string(9, '\0')));
  CHECK_THROWS(audio_io::read_wav(dir / "pcm24.wav"));

  auto full = riff(1, 1, 8000, 16, pcm16({1, 2, 3, 4}));
  dump(dir / "trunc.wav", full.substr(0, full.size() - 3));
  CHECK_THROWS(audio_io::read_wav(dir / "trunc.wav"));
}

TEST_CASE("writer rejects non-finite samples with the index") {
  testing::TempDir dir;
  Waveform w{{0.0f, 1.0f, std::nanf(""), 0.0f}, 16000};
  try {
    audio_io::write_wav(w, dir / "bad.wav");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
  CHECK_THROWS(audio_io::write_wav(Waveform{{1.0f}, 16000}, dir / "no/such/dir/x.wav"));
}

TEST_CASE("resample identity and length") {
  const auto w = testing::noise(1234, 16000, 3);
  CHECK(audio_io::resample(w, 16000) == w);
  CHECK(audio_io::resample(w, 8000).size() == 617);
  CHECK(audio_io::resample(w, 44100).size() ==
        static_cast<std::size_t>(std::llround(1234.0 * 44100 / 16000)));
  CHECK(audio_io::resample(w, 8000).sample_rate == 8000);
}

TEST_CASE("resample preserves DC") {
  Waveform dc{std::vector<float>(44100, 0.5f), 44100};
  const auto out = audio_io::resample(dc, 16000);
  REQUIRE(out.size() == 16000);
  for (std::size_t i = 100; i + 100 < out.size(); ++i) CHECK(std::abs(out.samples[i] - 0.5) < 1e-3);
}

namespace {

// Amplitude at `freq` and the strongest component elsewhere, via a direct
// DFT over a Hann-windowed interior segment.
std::pair<double, double> tone_and_spur(const Waveform& w, double freq) {
  const std::size_t n = 8000, start = 1000;
  std::vector<double> frame(n);
  for (std::size_t i = 0; i < n; ++i)
    frame[i] = w.samples[start + i] * (0.5 - 0.5 * std::cos(2 * M_PI * i / n));
  const auto spec = testing::naive_dft(frame);
  const double hz = static_cast<double>(w.sample_rate) / n;
  const auto target = static_cast<std::size_t>(std::llround(freq / hz));
  double peak = 0.0, spur = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double a = std::abs(spec[k]);
    if (k + 3 >= target && k <= target + 3) peak = std::max(peak, a);
    else spur = std::max(spur, a);
  }
  return {peak, spur};
}

}  // namespace

TEST_CASE("resampled tone lands on its bin with low aliasing") {
  const auto tone = testing::sine(1000.0, 1.0, 44100);
  const auto out = audio_io::resample(tone, 16000);
  const auto [peak, spur] = tone_and_spur(out, 1000.0);
  CHECK(20 * std::log10(spur / peak) < -60.0);
}

TEST_CASE("passband ripple below 0.1 dB up to 0.8 of output Nyquist") {
  for (int target : {16000, 8000}) {
    const double top = 0.8 * target / 2;
    for (double f = 200.0; f <= top; f += 700.0) {
      Waveform in = testing::sine(f, 1.0, 44100, 0.5);
      const auto out = audio_io::resample(in, target);
      double e = 0.0;
      const std::size_t lo = 200, hi = out.size() - 200;
      for (std::size_t i = lo; i < hi; ++i) e += static_cast<double>(out.samples[i]) * out.samples[i];
      const double amp = std::sqrt(2.0 * e / (hi - lo));
      INFO("target " << target << " f " << f);
      CHECK(std::abs(20 * std::log10(amp / 0.5)) < 0.1);
    }
  }
}
