#pragma once

#include "cmsep/dsp.hpp"

namespace cmsep {

// Unbounded complex gain field over the F x T grid of a spectrogram.
struct ComplexMask {
  Grid real;
  Grid imag;

  ComplexMask() = default;
  ComplexMask(std::size_t bins, std::size_t frames, float re = 0.0f, float im = 0.0f)
      : real(bins, frames, re), imag(bins, frames, im) {}

  std::size_t bins() const { return real.rows; }
  std::size_t frames() const { return real.cols; }
};

namespace masking {

inline constexpr double kDefaultCirmEps = 1e-8;

// Regularized complex division S / Y: S * conj(Y) / (|Y|^2 + eps).
ComplexMask compute_cirm(const ComplexSpectrogram& source, const ComplexSpectrogram& mixture,
                         double eps = kDefaultCirmEps);

// Elementwise complex product M * Y.
ComplexSpectrogram apply_mask(const ComplexMask& mask, const ComplexSpectrogram& mixture);

// Sum over both sources of the L1 distance between the clean spectrum and
// the masked mixture, real and imaginary parts separately, divided by the
// number of time-frequency cells.
double loss_cirm_cs(const ComplexMask& mask_voice, const ComplexMask& mask_acc,
                    const ComplexSpectrogram& mixture, const ComplexSpectrogram& voice,
                    const ComplexSpectrogram& acc);

// Direct complex-spectrum mapping baseline, same reduction.
double loss_tcs(const ComplexSpectrogram& est_voice, const ComplexSpectrogram& est_acc,
                const ComplexSpectrogram& voice, const ComplexSpectrogram& acc);

// Magnitude-spectrum mapping baseline, same reduction.
double loss_tms(const Grid& est_mag_voice, const Grid& est_mag_acc, const Grid& mag_voice,
                const Grid& mag_acc);

// istft(from_polar(mag, phase(phase_source))), trimmed to `length` if given.
Waveform resynthesize_with_phase(const Grid& mag, const ComplexSpectrogram& phase_source,
                                 std::optional<std::size_t> length = std::nullopt);

}  // namespace masking
}  // namespace cmsep
