#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmsep/audio_io.hpp"
#include "cmsep/autograd.hpp"
#include "cmsep/dataset.hpp"
#include "cmsep/train.hpp"

namespace testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cmsep-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline cmsep::Waveform noise(std::size_t n, int rate, std::uint64_t seed, double sigma = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  cmsep::Waveform w{std::vector<float>(n), rate};
  for (auto& v : w.samples) v = static_cast<float>(d(rng));
  return w;
}

inline cmsep::Waveform sine(double freq, double seconds, int rate, double amp = 0.5) {
  cmsep::Waveform w{std::vector<float>(static_cast<std::size_t>(seconds * rate)), rate};
  for (std::size_t i = 0; i < w.size(); ++i)
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / rate));
  return w;
}

inline cmsep::Waveform sum(const cmsep::Waveform& a, const cmsep::Waveform& b) {
  cmsep::Waveform out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

inline double rel_l2(const std::vector<float>& ref, const std::vector<float>& x) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = static_cast<double>(x[i]) - ref[i];
    num += d * d;
    den += static_cast<double>(ref[i]) * ref[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

// A 2-source toy song plus its mixture.
struct Mix {
  cmsep::Waveform voice, acc, mixture;
};

inline Mix toy_mix(int index, double seconds, int rate, std::uint64_t seed = 1) {
  auto s = cmsep::dataset::synthesize_song(index, seconds, rate, seed);
  Mix m{s.voice, s.accompaniment, sum(s.voice, s.accompaniment)};
  return m;
}

// Direct O(N^2) one-sided DFT of a real frame.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += frame[t] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * t) / n);
    out[k] = acc;
  }
  return out;
}

using DTensor = cmsep::ag::Tensor<double>;

// Central-difference check of d f(inputs) / d inputs. Returns the largest
// per-tensor relative error |analytic - numeric|_2 / max(|numeric|_2, 1e-6).
inline double gradcheck(const std::function<DTensor(const std::vector<DTensor>&)>& f,
                        std::vector<DTensor> inputs, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  DTensor out = f(inputs);
  out.backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.numel());
    auto vals = t.mutable_values();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = f(inputs).item();
      vals[i] = keep - h;
      const double down = f(inputs).item();
      vals[i] = keep;
      numeric[i] = (up - down) / (2 * h);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      den += numeric[i] * numeric[i];
    }
    // Exactly-zero gradients (e.g. a bias softmax is invariant to) leave
    // only rounding noise in the numeric estimate.
    const double err = std::sqrt(num / std::max(den, 1e-12));
    worst = std::max(worst, err);
  }
  return worst;
}

inline DTensor random_tensor(cmsep::ag::Shape shape, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0, bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(cmsep::ag::numel(shape));
  for (auto& x : v) x = d(rng);
  return DTensor::from(std::move(shape), std::move(v), requires_grad);
}

// White noise with zero component along every reference delayed by
// 0..filter_len-1 (and zero in the filter_len-1 samples past the end, where
// the decomposition zero-extends the estimate), scaled so that
// |target|^2 / |noise|^2 equals 10^(ratio_db/10). Projection by Householder QR.
inline cmsep::Waveform orthogonal_noise(const std::vector<cmsep::Waveform>& refs,
                                        std::size_t target, std::size_t filter_len,
                                        double ratio_db, std::uint64_t seed) {
  const std::size_t n = refs.front().size(), ext = n + filter_len - 1;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ext),
                                                static_cast<Eigen::Index>(refs.size() * filter_len + filter_len - 1));
  Eigen::Index col = 0;
  for (const auto& r : refs)
    for (std::size_t d = 0; d < filter_len; ++d, ++col)
      for (std::size_t i = 0; i < n; ++i) basis(static_cast<Eigen::Index>(i + d), col) = r.samples[i];
  for (std::size_t i = n; i < ext; ++i, ++col) basis(static_cast<Eigen::Index>(i), col) = 1.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(static_cast<Eigen::Index>(ext));
  for (auto& x : v) x = dist(rng);
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(v);
  const Eigen::VectorXd resid = v - basis * coef;

  double target_energy = 0.0;
  for (float x : refs[target].samples) target_energy += static_cast<double>(x) * x;
  const double k = std::sqrt(target_energy / std::pow(10.0, ratio_db / 10.0) / resid.squaredNorm());
  cmsep::Waveform out{std::vector<float>(n), refs.front().sample_rate};
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(k * resid(static_cast<Eigen::Index>(i)));
  return out;
}

// The one-song overfit setting: half a second at 4 kHz, 128-sample window
// with a 32-sample hop, and a 2-level net wide enough to memorise the song.
struct OverfitSetup {
  cmsep::dataset::LoadedEntry song;
  cmsep::train::TrainConfig config;
};

inline OverfitSetup overfit_setup(const std::filesystem::path& checkpoint_dir, int steps = 500) {
  OverfitSetup o;
  const auto s = cmsep::dataset::synthesize_song(0, 0.5, 4000, 1);
  o.song.entry.id = s.name;
  o.song.voice = s.voice;
  o.song.accompaniment = s.accompaniment;
  o.song.mixture = sum(s.voice, s.accompaniment);

  auto& c = o.config;
  c.stft = {128, 32, 4000};
  c.model.num_down = c.model.num_up = 2;
  c.model.num_dense_blocks = 5;
  c.model.growth = 16;
  c.model.reorg_channels = 64;
  c.model.freq_bins = 65;
  c.model.normalize_input = false;
  c.lr = 5e-5;
  // One epoch of `steps` full-song crops: every step sees the whole song.
  c.epochs = 1;
  c.crops_per_song = steps;
  c.frames_per_example = 100000;
  c.seed = 0;
  c.checkpoint_dir = checkpoint_dir;
  return o;
}

}  // namespace testing
