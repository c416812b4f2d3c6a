#include "cmsep/masking.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cmsep::masking {
namespace {

void require_same(const Grid& a, const Grid& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) +
                                "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols) + ")");
}

void require_finite(const Grid& g, const char* op) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::isfinite(g.data[i]))
      throw std::invalid_argument(std::string(op) + ": non-finite value at cell " +
                                  std::to_string(i));
}

// Mean over cells of |Re(s - m*y)| + |Im(s - m*y)|.
double masked_l1(const ComplexMask& m, const ComplexSpectrogram& y, const ComplexSpectrogram& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.real.size(); ++i) {
    const double mr = m.real.data[i], mi = m.imag.data[i];
    const double yr = y.real.data[i], yi = y.imag.data[i];
    acc += std::abs(s.real.data[i] - (mr * yr - mi * yi));
    acc += std::abs(s.imag.data[i] - (mr * yi + mi * yr));
  }
  return acc;
}

}  // namespace

ComplexMask compute_cirm(const ComplexSpectrogram& source, const ComplexSpectrogram& mixture,
                         double eps) {
  require_same(source.real, mixture.real, "compute_cirm");
  require_same(source.imag, mixture.imag, "compute_cirm");
  if (!(eps > 0.0)) throw std::invalid_argument("compute_cirm: eps must be positive");
  ComplexMask m(mixture.bins(), mixture.frames());
  for (std::size_t i = 0; i < m.real.size(); ++i) {
    const double sr = source.real.data[i], si = source.imag.data[i];
    const double yr = mixture.real.data[i], yi = mixture.imag.data[i];
    const double denom = yr * yr + yi * yi + eps;
    m.real.data[i] = static_cast<float>((sr * yr + si * yi) / denom);
    m.imag.data[i] = static_cast<float>((si * yr - sr * yi) / denom);
  }
  return m;
}

ComplexSpectrogram apply_mask(const ComplexMask& mask, const ComplexSpectrogram& mixture) {
  require_same(mask.real, mixture.real, "apply_mask");
  require_same(mask.imag, mixture.imag, "apply_mask");
  ComplexSpectrogram out(mixture.bins(), mixture.frames(), mixture.params);
  for (std::size_t i = 0; i < out.real.size(); ++i) {
    const double mr = mask.real.data[i], mi = mask.imag.data[i];
    const double yr = mixture.real.data[i], yi = mixture.imag.data[i];
    out.real.data[i] = static_cast<float>(mr * yr - mi * yi);
    out.imag.data[i] = static_cast<float>(mr * yi + mi * yr);
  }
  return out;
}

double loss_cirm_cs(const ComplexMask& mask_voice, const ComplexMask& mask_acc,
                    const ComplexSpectrogram& mixture, const ComplexSpectrogram& voice,
                    const ComplexSpectrogram& acc) {
  for (const Grid* g : {&mask_voice.real, &mask_voice.imag, &mask_acc.real, &mask_acc.imag,
                        &voice.real, &voice.imag, &acc.real, &acc.imag, &mixture.imag}) {
    require_same(*g, mixture.real, "loss_cirm_cs");
  }
  for (const Grid* g : {&mask_voice.real, &mask_voice.imag, &mask_acc.real, &mask_acc.imag,
                        &voice.real, &voice.imag, &acc.real, &acc.imag, &mixture.real,
                        &mixture.imag}) {
    require_finite(*g, "loss_cirm_cs");
  }
  const double cells = static_cast<double>(mixture.real.size());
  if (cells == 0.0) return 0.0;
  return (masked_l1(mask_voice, mixture, voice) + masked_l1(mask_acc, mixture, acc)) / cells;
}

double loss_tcs(const ComplexSpectrogram& est_voice, const ComplexSpectrogram& est_acc,
                const ComplexSpectrogram& voice, const ComplexSpectrogram& acc) {
  for (const Grid* g :
       {&est_voice.imag, &est_acc.real, &est_acc.imag, &voice.real, &voice.imag, &acc.real,
        &acc.imag}) {
    require_same(*g, est_voice.real, "loss_tcs");
  }
  const double cells = static_cast<double>(voice.real.size());
  if (cells == 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < voice.real.size(); ++i) {
    total += std::abs(static_cast<double>(est_voice.real.data[i]) - voice.real.data[i]);
    total += std::abs(static_cast<double>(est_voice.imag.data[i]) - voice.imag.data[i]);
    total += std::abs(static_cast<double>(est_acc.real.data[i]) - acc.real.data[i]);
    total += std::abs(static_cast<double>(est_acc.imag.data[i]) - acc.imag.data[i]);
  }
  return total / cells;
}

double loss_tms(const Grid& est_mag_voice, const Grid& est_mag_acc, const Grid& mag_voice,
                const Grid& mag_acc) {
  require_same(est_mag_acc, est_mag_voice, "loss_tms");
  require_same(mag_voice, est_mag_voice, "loss_tms");
  require_same(mag_acc, est_mag_voice, "loss_tms");
  const double cells = static_cast<double>(mag_voice.size());
  if (cells == 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < mag_voice.size(); ++i) {
    total += std::abs(static_cast<double>(est_mag_voice.data[i]) - mag_voice.data[i]);
    total += std::abs(static_cast<double>(est_mag_acc.data[i]) - mag_acc.data[i]);
  }
  return total / cells;
}

Waveform resynthesize_with_phase(const Grid& mag, const ComplexSpectrogram& phase_source,
                                 std::optional<std::size_t> length) {
  require_same(mag, phase_source.real, "resynthesize_with_phase");
  return dsp::istft(dsp::from_polar(mag, dsp::phase(phase_source), phase_source.params), length);
}

}  // namespace cmsep::masking
