#include "cmsep/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace cmsep::metrics {
namespace {

using Cplx = std::complex<double>;
constexpr double kDiagonalLoad = 1e-10;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

void check_inputs(std::span<const Waveform> refs, std::size_t len) {
  if (refs.empty()) throw std::invalid_argument("bss_eval: no references");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].size() != len)
      throw std::invalid_argument("bss_eval: reference " + std::to_string(i) + " has " +
                                  std::to_string(refs[i].size()) + " samples, expected " +
                                  std::to_string(len));
    if (std::all_of(refs[i].samples.begin(), refs[i].samples.end(),
                    [](float v) { return v == 0.0f; }))
      throw std::invalid_argument("bss_eval: reference " + std::to_string(i) + " is all zero");
  }
}

// Spectra of the references at a common FFT size plus their correlations.
class Projector {
 public:
  Projector(std::span<const Waveform> refs, std::size_t filter_len)
      : n_refs_(refs.size()), len_(refs.front().size()), flen_(filter_len),
        nfft_(next_pow2(len_ + filter_len - 1)) {
    spectra_.resize(n_refs_);
    for (std::size_t i = 0; i < n_refs_; ++i) spectra_[i] = fft(refs[i].samples);

    // Gram matrix of all delayed references: block (i,k) is Toeplitz with
    // entry (a, b) = sum_m r_i(m) r_k(m + a - b).
    const std::size_t dim = n_refs_ * flen_;
    gram_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n_refs_; ++i) {
      for (std::size_t k = 0; k < n_refs_; ++k) {
        const std::vector<double> xc = correlate(spectra_[i], spectra_[k]);
        for (std::size_t a = 0; a < flen_; ++a)
          for (std::size_t b = 0; b < flen_; ++b) {
            const std::ptrdiff_t lag = static_cast<std::ptrdiff_t>(a) - static_cast<std::ptrdiff_t>(b);
            const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                             : nfft_ - static_cast<std::size_t>(-lag);
            gram_(static_cast<Eigen::Index>(i * flen_ + a),
                  static_cast<Eigen::Index>(k * flen_ + b)) = xc[idx];
          }
      }
    }
    gram_.diagonal().array() += kDiagonalLoad;
  }

  std::size_t extended_len() const { return len_ + flen_ - 1; }

  // Projection of `estimate` onto the delayed spans of `which` references.
  std::vector<double> project(const std::vector<Cplx>& est_spec,
                              const std::vector<std::size_t>& which) const {
    const std::size_t dim = which.size() * flen_;
    Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(dim));
    for (std::size_t u = 0; u < which.size(); ++u) {
      for (std::size_t v = 0; v < which.size(); ++v)
        g.block(static_cast<Eigen::Index>(u * flen_), static_cast<Eigen::Index>(v * flen_),
                static_cast<Eigen::Index>(flen_), static_cast<Eigen::Index>(flen_)) =
            gram_.block(static_cast<Eigen::Index>(which[u] * flen_),
                        static_cast<Eigen::Index>(which[v] * flen_),
                        static_cast<Eigen::Index>(flen_), static_cast<Eigen::Index>(flen_));
      // rhs(a) = sum_n e(n) r_i(n - a) = sum_m r_i(m) e(m + a)
      const std::vector<double> xc = correlate(spectra_[which[u]], est_spec);
      for (std::size_t a = 0; a < flen_; ++a)
        rhs(static_cast<Eigen::Index>(u * flen_ + a)) = xc[a];
    }
    const Eigen::VectorXd coef = g.ldlt().solve(rhs);

    // sum_i (coef_i * r_i) as a full linear convolution.
    std::vector<Cplx> acc(nfft_, Cplx(0.0, 0.0));
    for (std::size_t u = 0; u < which.size(); ++u) {
      std::vector<double> c(flen_);
      for (std::size_t a = 0; a < flen_; ++a) c[a] = coef(static_cast<Eigen::Index>(u * flen_ + a));
      const std::vector<Cplx> cf = fft(c);
      const auto& rf = spectra_[which[u]];
      for (std::size_t f = 0; f < nfft_; ++f) acc[f] += cf[f] * rf[f];
    }
    std::vector<double> out = ifft(acc);
    out.resize(extended_len());
    return out;
  }

  std::vector<Cplx> fft(const std::vector<float>& x) const {
    return fft(std::vector<double>(x.begin(), x.end()));
  }

  std::vector<Cplx> fft(std::vector<double> x) const {
    x.resize(nfft_, 0.0);
    Eigen::FFT<double> engine;
    std::vector<Cplx> out;
    engine.fwd(out, x);
    return out;
  }

 private:
  std::vector<double> ifft(const std::vector<Cplx>& x) const {
    Eigen::FFT<double> engine;
    std::vector<double> out;
    engine.inv(out, x);
    return out;
  }

  // Circular cross-correlation sum_m x(m) y(m + lag), indexed by lag mod nfft.
  std::vector<double> correlate(const std::vector<Cplx>& xf, const std::vector<Cplx>& yf) const {
    std::vector<Cplx> prod(nfft_);
    for (std::size_t f = 0; f < nfft_; ++f) prod[f] = std::conj(xf[f]) * yf[f];
    return ifft(prod);
  }

  std::size_t n_refs_, len_, flen_, nfft_;
  std::vector<std::vector<Cplx>> spectra_;
  Eigen::MatrixXd gram_;
};

Decomposition decompose_with(const Projector& proj, std::size_t n_refs, const Waveform& estimate,
                             std::size_t target_index) {
  const auto est_spec = proj.fft(estimate.samples);
  std::vector<std::size_t> all(n_refs);
  for (std::size_t i = 0; i < n_refs; ++i) all[i] = i;

  Decomposition d;
  d.target = proj.project(est_spec, {target_index});
  const std::vector<double> p_all = proj.project(est_spec, all);
  const std::size_t n = proj.extended_len();
  d.interference.resize(n);
  d.artifacts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = i < estimate.size() ? estimate.samples[i] : 0.0;
    d.interference[i] = p_all[i] - d.target[i];
    d.artifacts[i] = e - p_all[i];
  }
  return d;
}

}  // namespace

double ratio_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kDbCap : 0.0;
  if (num <= 0.0) return -kDbCap;
  return std::clamp(10.0 * std::log10(num / den), -kDbCap, kDbCap);
}

BssScores scores_from(const Decomposition& d) {
  const std::size_t n = d.target.size();
  std::vector<double> distortion(n), filtered(n);
  for (std::size_t i = 0; i < n; ++i) {
    distortion[i] = d.interference[i] + d.artifacts[i];
    filtered[i] = d.target[i] + d.interference[i];
  }
  const double target_energy = energy(d.target);
  BssScores s;
  s.sdr = ratio_db(target_energy, energy(distortion));
  s.sir = ratio_db(target_energy, energy(d.interference));
  s.sar = ratio_db(energy(filtered), energy(d.artifacts));
  return s;
}

Decomposition bss_decompose(std::span<const Waveform> references, const Waveform& estimate,
                            std::size_t target_index, std::size_t filter_len) {
  if (filter_len == 0) throw std::invalid_argument("bss_eval: filter_len must be >= 1");
  check_inputs(references, estimate.size());
  if (target_index >= references.size()) throw std::invalid_argument("bss_eval: bad target index");
  const Projector proj(references, filter_len);
  return decompose_with(proj, references.size(), estimate, target_index);
}

std::vector<BssScores> bss_eval(std::span<const Waveform> references,
                                std::span<const Waveform> estimates, std::size_t filter_len) {
  if (filter_len == 0) throw std::invalid_argument("bss_eval: filter_len must be >= 1");
  if (references.size() != estimates.size())
    throw std::invalid_argument("bss_eval: " + std::to_string(references.size()) +
                                " references but " + std::to_string(estimates.size()) +
                                " estimates");
  if (references.empty()) throw std::invalid_argument("bss_eval: no references");
  const std::size_t len = references.front().size();
  check_inputs(references, len);
  for (std::size_t i = 0; i < estimates.size(); ++i)
    if (estimates[i].size() != len)
      throw std::invalid_argument("bss_eval: estimate " + std::to_string(i) + " has " +
                                  std::to_string(estimates[i].size()) + " samples, expected " +
                                  std::to_string(len));

  const Projector proj(references, filter_len);
  std::vector<BssScores> out(estimates.size());
  const auto count = static_cast<std::ptrdiff_t>(estimates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < count; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    out[idx] = scores_from(decompose_with(proj, references.size(), estimates[idx], idx));
  }
  return out;
}

double snr_db(const Waveform& signal, const Waveform& rest) {
  if (signal.size() != rest.size())
    throw std::invalid_argument("snr: signal has " + std::to_string(signal.size()) +
                                " samples, rest has " + std::to_string(rest.size()));
  double es = 0.0, er = 0.0;
  for (float v : signal.samples) es += static_cast<double>(v) * v;
  for (float v : rest.samples) er += static_cast<double>(v) * v;
  if (er <= 0.0) throw std::invalid_argument("snr: rest has zero energy");
  return 10.0 * std::log10(es / er);
}

BssScores aggregate(std::span<const BssScores> scores, Aggregate mode) {
  if (scores.empty()) throw std::invalid_argument("aggregate: no scores");
  auto reduce = [&](double BssScores::*field) {
    std::vector<double> v;
    for (const auto& s : scores) v.push_back(s.*field);
    if (mode == Aggregate::Mean) {
      double sum = 0.0;
      for (double x : v) sum += x;
      return sum / static_cast<double>(v.size());
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return {reduce(&BssScores::sdr), reduce(&BssScores::sir), reduce(&BssScores::sar)};
}

std::vector<ScoreRow> aggregate_rows(std::span<const ScoreRow> rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<BssScores>> by_source;
  for (const auto& r : rows) {
    if (!by_source.count(r.source)) order.push_back(r.source);
    by_source[r.source].push_back(r.scores);
  }
  std::vector<ScoreRow> out;
  for (const char* mode : {"mean", "median"}) {
    for (const auto& src : order) {
      const auto m = std::string(mode) == "mean" ? Aggregate::Mean : Aggregate::Median;
      out.push_back({mode, src, aggregate(by_source[src], m)});
    }
  }
  return out;
}

std::vector<ScoreRow> pooled_rows(std::span<const ScoreRow> rows) {
  std::vector<BssScores> all;
  for (const auto& r : rows) all.push_back(r.scores);
  return {{"mean", "all", aggregate(all, Aggregate::Mean)},
          {"median", "all", aggregate(all, Aggregate::Median)}};
}

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# cmsep-scores v1\n";
  out << "song_id,source,sdr,sir,sar\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& r : rows)
    out << r.song_id << ',' << r.source << ',' << r.scores.sdr << ',' << r.scores.sir << ','
        << r.scores.sar << '\n';
}

}  // namespace cmsep::metrics
