#include <fstream>

#include "cmsep/dsp.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmsep;

TEST_CASE("StftParams validation and ms conversion") {
  CHECK_NOTHROW((StftParams{1024, 256, 16000}.validate()));
  CHECK_THROWS((StftParams{1023, 256, 16000}.validate()));
  CHECK_THROWS((StftParams{1024, 300, 16000}.validate()));
  CHECK_THROWS((StftParams{8, 2, 16000}.validate()));
  const auto p = StftParams::from_ms(64.0, 0.25, 16000);
  CHECK(p.window_len == 1024);
  CHECK(p.hop == 256);
  CHECK(p.freq_bins() == 513);
}

TEST_CASE("zero in, zero out") {
  const StftParams p{256, 64, 16000};
  Waveform z{std::vector<float>(1000, 0.0f), 16000};
  const auto s = dsp::stft(z, p);
  CHECK(s.bins() == 129);
  CHECK(s.frames() == dsp::frame_count(1000, p));
  for (float v : s.real.data) CHECK(v == 0.0f);
  for (float v : s.imag.data) CHECK(v == 0.0f);
  const auto back = dsp::istft(ComplexSpectrogram(129, 20, p));
  for (float v : back.samples) CHECK(v == 0.0f);
}

TEST_CASE("DC energy concentrates in bin 0") {
  // Inside the signal a DC frame is the window scaled by the level, so each
  // bin must equal 0.7 * |DFT(window)| and bin 0 must dominate. Leakage into
  // bins >= 2 is the window's own sidelobe (-23.5 dB at bin 2 for sqrt-Hann).
  const StftParams p{512, 128, 16000};
  Waveform dc{std::vector<float>(8000, 0.7f), 16000};
  const auto s = dsp::stft(dc, p);
  const auto mag = dsp::magnitude(s);
  const auto win = dsp::sqrt_hann(p.window_len);
  const auto ref = testing::naive_dft(win);
  for (std::size_t t = 4; t + 4 < s.frames(); ++t) {
    double e0 = 0.0, rest = 0.0;
    for (std::size_t f = 0; f < s.bins(); ++f) {
      CHECK(mag(f, t) == doctest::Approx(0.7 * std::abs(ref[f])).epsilon(1e-4).scale(mag(0, t)));
      if (f >= 1) CHECK(mag(f, t) < mag(0, t));
      if (f >= 2) rest += static_cast<double>(mag(f, t)) * mag(f, t);
      else e0 += static_cast<double>(mag(f, t)) * mag(f, t);
    }
    CHECK(rest / e0 < 1e-2);
  }
}

TEST_CASE("windowed impulse has flat magnitude equal to the window value") {
  const StftParams p{64, 16, 8000};
  const std::size_t k = 100;
  Waveform w{std::vector<float>(400, 0.0f), 8000};
  w.samples[k] = 1.0f;
  const auto s = dsp::stft(w, p);
  const auto win = dsp::sqrt_hann(p.window_len);
  const std::size_t padded = k + dsp::leading_pad(p);
  int covering = 0;
  for (std::size_t t = 0; t < s.frames(); ++t) {
    const std::size_t start = t * p.hop;
    if (padded < start || padded >= start + p.window_len) continue;
    ++covering;
    const double expect = win[padded - start];
    for (std::size_t f = 0; f < s.bins(); ++f) {
      const double m = std::hypot(s.real(f, t), s.imag(f, t));
      CHECK(m == doctest::Approx(expect).epsilon(1e-5));
    }
  }
  CHECK(covering == p.window_len / p.hop);
}

TEST_CASE("frames match a direct DFT of the windowed padded signal") {
  const StftParams p{32, 8, 8000};
  const auto w = testing::noise(100, 8000, 11);
  const auto s = dsp::stft(w, p);
  const auto win = dsp::sqrt_hann(p.window_len);
  const std::size_t lead = dsp::leading_pad(p);
  for (std::size_t t : {std::size_t{0}, std::size_t{5}, s.frames() - 1}) {
    std::vector<double> frame(p.window_len);
    for (int i = 0; i < p.window_len; ++i) {
      const auto pos = static_cast<long>(t * p.hop + i) - static_cast<long>(lead);
      const double x = pos >= 0 && pos < static_cast<long>(w.size()) ? w.samples[pos] : 0.0;
      frame[i] = x * win[i];
    }
    const auto ref = testing::naive_dft(frame);
    for (std::size_t f = 0; f < s.bins(); ++f) {
      CHECK(s.real(f, t) == doctest::Approx(ref[f].real()).epsilon(1e-4).scale(1.0));
      CHECK(s.imag(f, t) == doctest::Approx(ref[f].imag()).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("round trip on every grid cell") {
  for (double ms : {32.0, 64.0, 128.0})
    for (double shift : {0.125, 0.25, 0.5}) {
      const auto p = StftParams::from_ms(ms, shift, 16000);
      const auto w = testing::noise(32000, 16000, 5);
      const auto back = dsp::istft(dsp::stft(w, p), w.size());
      INFO("window " << p.window_len << " hop " << p.hop);
      CHECK(testing::rel_l2(w.samples, back.samples) < 1e-6);
    }
}

TEST_CASE("round trip with lengths that are not hop multiples") {
  const StftParams p{128, 32, 8000};
  for (std::size_t n : {32, 33, 127, 500, 1001}) {
    const auto w = testing::noise(n, 8000, n);
    const auto s = dsp::stft(w, p);
    CHECK(dsp::max_signal_length(s.frames(), p) >= n);
    const auto back = dsp::istft(s, n);
    CHECK(back.size() == n);
    CHECK(testing::rel_l2(w.samples, back.samples) < 1e-6);
  }
}

TEST_CASE("too-short signal is rejected") {
  const StftParams p{128, 32, 8000};
  try {
    dsp::stft(Waveform{std::vector<float>(10), 8000}, p);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("32") != std::string::npos);
  }
}

TEST_CASE("stft is linear") {
  const StftParams p{256, 64, 16000};
  const auto x = testing::noise(3000, 16000, 1);
  const auto y = testing::noise(3000, 16000, 2);
  Waveform z = x;
  for (std::size_t i = 0; i < z.size(); ++i) z.samples[i] = 0.5f * x.samples[i] - 2.0f * y.samples[i];
  const auto sx = dsp::stft(x, p), sy = dsp::stft(y, p), sz = dsp::stft(z, p);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sz.real.size(); ++i) {
    const double er = sz.real.data[i] - (0.5 * sx.real.data[i] - 2.0 * sy.real.data[i]);
    const double ei = sz.imag.data[i] - (0.5 * sx.imag.data[i] - 2.0 * sy.imag.data[i]);
    num += er * er + ei * ei;
    den += sz.real.data[i] * sz.real.data[i] + sz.imag.data[i] * sz.imag.data[i];
  }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("Parseval per frame") {
  const StftParams p{128, 32, 8000};
  const auto w = testing::noise(2000, 8000, 9);
  const auto s = dsp::stft(w, p);
  const auto win = dsp::sqrt_hann(p.window_len);
  const std::size_t lead = dsp::leading_pad(p);
  const std::size_t n = p.window_len;
  for (std::size_t t = 0; t < s.frames(); t += 7) {
    double et = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = static_cast<long>(t * p.hop + i) - static_cast<long>(lead);
      const double x = pos >= 0 && pos < static_cast<long>(w.size()) ? w.samples[pos] * win[i] : 0.0;
      et += x * x;
    }
    // One-sided: interior bins count twice.
    double ef = 0.0;
    for (std::size_t f = 0; f < s.bins(); ++f) {
      const double m2 = s.real(f, t) * s.real(f, t) + s.imag(f, t) * s.imag(f, t);
      ef += (f == 0 || f == n / 2) ? m2 : 2 * m2;
    }
    ef /= static_cast<double>(n);
    if (et > 0) CHECK(ef == doctest::Approx(et).epsilon(1e-5));
  }
}

TEST_CASE("polar helpers") {
  const StftParams p{16, 4, 8000};
  ComplexSpectrogram x(9, 1, p);
  x.real(0, 0) = 3.0f;
  x.imag(0, 0) = 4.0f;
  x.real(1, 0) = -1.0f;  // phase pi, not -pi
  x.imag(1, 0) = -0.0f;
  const auto m = dsp::magnitude(x);
  const auto ph = dsp::phase(x);
  CHECK(m(0, 0) == 5.0f);
  CHECK(ph(0, 0) == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(ph(1, 0) == doctest::Approx(M_PI));
  CHECK(m(2, 0) == 0.0f);
  CHECK(ph(2, 0) == 0.0f);

  const auto w = testing::noise(200, 8000, 4);
  const auto a = dsp::stft(w, p);
  const auto b = dsp::stft(testing::noise(200, 8000, 5), p);
  const auto back = dsp::from_polar(dsp::magnitude(a), dsp::phase(a), p);
  for (std::size_t i = 0; i < a.real.size(); ++i) {
    CHECK(back.real.data[i] == doctest::Approx(a.real.data[i]).epsilon(1e-6).scale(1.0));
    CHECK(back.imag.data[i] == doctest::Approx(a.imag.data[i]).epsilon(1e-6).scale(1.0));
  }
  const auto mixed = dsp::from_polar(dsp::magnitude(a), dsp::phase(b), p);
  const auto ma = dsp::magnitude(a), mm = dsp::magnitude(mixed);
  for (std::size_t i = 0; i < ma.size(); ++i)
    CHECK(mm.data[i] == doctest::Approx(ma.data[i]).epsilon(1e-6).scale(1.0));
  for (float v : dsp::magnitude(b).data) CHECK(v >= 0.0f);
  for (float v : dsp::phase(b).data) {
    CHECK(v > -M_PI);
    CHECK(v <= M_PI + 1e-6);
  }
  CHECK_THROWS(dsp::from_polar(Grid(9, 2), Grid(9, 3), p));
}

TEST_CASE("istft rejects inconsistent shapes") {
  const StftParams p{64, 16, 8000};
  CHECK_THROWS(dsp::istft(ComplexSpectrogram(20, 10, p)));
}

TEST_CASE("spectrogram container round trip") {
  testing::TempDir dir;
  const StftParams p{64, 16, 8000};
  const auto s = dsp::stft(testing::noise(300, 8000, 3), p);
  dsp::save_spectrogram(s, dir / "s.cspg");
  const auto r = dsp::load_spectrogram(dir / "s.cspg");
  CHECK(r.params == p);
  CHECK(r.real == s.real);
  CHECK(r.imag == s.imag);
  std::ofstream(dir / "bad.cspg") << "nope";
  CHECK_THROWS(dsp::load_spectrogram(dir / "bad.cspg"));
}
