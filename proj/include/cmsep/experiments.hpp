#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmsep/dataset.hpp"
#include "cmsep/metrics.hpp"
#include "cmsep/separate.hpp"
#include "cmsep/train.hpp"

namespace cmsep::experiments {

inline const char* const kSources[2] = {"voice", "acc"};

// Estimates are read from <estimates_dir>/<entry id>/voice.wav and acc.wav.
// Returns per-song rows followed by the pooled mean and median rows; the CSV
// at `csv` holds exactly those rows, and a sibling "<stem>_by_source.csv"
// holds per-source mean and median rows.
std::vector<metrics::ScoreRow> evaluate(const dataset::Manifest& manifest,
                                        const std::filesystem::path& estimates_dir,
                                        const std::filesystem::path& csv,
                                        std::size_t filter_len = metrics::kDefaultFilterLen);

struct PhaseOracleRow {
  std::string song_id;
  std::string source;
  double sdr_mixture_phase = 0.0;
  double sdr_clean_phase = 0.0;
  double difference() const { return sdr_clean_phase - sdr_mixture_phase; }
};

// Magnitude estimates for one song: the clean |S_j| when `separator` is
// null, otherwise |model output|.
std::vector<PhaseOracleRow> phase_oracle_song(const dataset::LoadedEntry& song,
                                              const StftParams& params,
                                              const SpectralSeparator* separator,
                                              std::size_t filter_len);

// Over the manifest's test split. Sources whose reference is silent are not
// scored against it; with a silent accompaniment the voice is scored alone.
std::vector<PhaseOracleRow> phase_oracle(const dataset::Manifest& manifest,
                                         const StftParams& params,
                                         const SpectralSeparator* separator,
                                         std::size_t filter_len = metrics::kDefaultFilterLen);

void write_phase_oracle_csv(const std::filesystem::path& path,
                            const std::vector<PhaseOracleRow>& rows);

// Complex-mask phase versus mixture phase with the same magnitudes.
struct PhaseEstimationRow {
  std::string source;
  double sdr_estimated_phase = 0.0;
  double sdr_mixture_phase = 0.0;
};

std::vector<PhaseEstimationRow> phase_estimation(const dataset::LoadedEntry& song,
                                                 const SpectralSeparator& separator,
                                                 std::size_t filter_len);

// SDR of |S_j| recombined with the mixture phase: the ceiling a magnitude
// model can reach at these STFT settings.
std::vector<double> mixture_phase_oracle_sdr(const dataset::LoadedEntry& song,
                                             const StftParams& params, std::size_t filter_len);

// Relative L2 error of istft(stft(x)) on `seconds` of white noise.
double roundtrip_error(const StftParams& params, double seconds, std::uint64_t seed);

struct GridOptions {
  std::vector<double> window_ms = {32.0, 64.0, 128.0};
  std::vector<double> shifts = {0.125, 0.25, 0.5};
  // Template for every cell; stft and model.freq_bins are overwritten.
  train::TrainConfig base;
  SeparationOptions separation;
  std::size_t filter_len = metrics::kDefaultFilterLen;
  std::filesystem::path work_dir = "grid";
};

struct GridCell {
  double window_ms = 0.0;
  double shift = 0.0;
  int window_len = 0;
  int hop = 0;
  double roundtrip_error = 0.0;
  double voice_sdr = 0.0;
  double acc_sdr = 0.0;
  double oracle_voice_sdr = 0.0;
  double oracle_acc_sdr = 0.0;
};

// Preflights every cell's STFT round trip (throws if any exceeds 1e-6),
// then trains, separates and scores one model per cell. SDRs are means over
// the test split.
std::vector<GridCell> grid_experiment(const dataset::Manifest& manifest,
                                      const GridOptions& options);

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridCell>& cells);

}  // namespace cmsep::experiments
