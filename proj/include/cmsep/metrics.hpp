#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmsep/audio_io.hpp"

namespace cmsep::metrics {

// Ratios are clamped to [-kDbCap, kDbCap] so an exact estimate (zero
// distortion energy) still aggregates to a finite number.
inline constexpr double kDbCap = 120.0;
inline constexpr std::size_t kDefaultFilterLen = 512;

struct BssScores {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

// Orthogonal split of an estimate (zero extended by filter_len - 1 samples):
// estimate = target + interference + artifacts.
struct Decomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
};

// BSS-Eval source decomposition. `target` is the least-squares projection of
// the estimate onto the target reference and its delays 0..filter_len-1,
// `interference` is the projection onto all references' delayed spans minus
// `target`. Normal equations are solved with a 1e-10 diagonal load.
Decomposition bss_decompose(std::span<const Waveform> references, const Waveform& estimate,
                            std::size_t target_index, std::size_t filter_len = kDefaultFilterLen);

BssScores scores_from(const Decomposition& d);

// Estimate i is scored against reference i. Throws std::invalid_argument on
// count or length mismatch, or an all-zero reference.
std::vector<BssScores> bss_eval(std::span<const Waveform> references,
                                std::span<const Waveform> estimates,
                                std::size_t filter_len = kDefaultFilterLen);

// 10 log10(|signal|^2 / |rest|^2) over the full length.
double snr_db(const Waveform& signal, const Waveform& rest);

// 10 log10(num / den), clamped to [-kDbCap, kDbCap].
double ratio_db(double num, double den);

enum class Aggregate { Mean, Median };
BssScores aggregate(std::span<const BssScores> scores, Aggregate mode);

struct ScoreRow {
  std::string song_id;
  std::string source;
  BssScores scores;
};

// "# cmsep-scores v1" comment line, header "song_id,source,sdr,sir,sar",
// one row per entry. Aggregate rows use song_id "mean" / "median".
void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRow> rows);

// Per-source mean and median rows for a list of per-song rows.
std::vector<ScoreRow> aggregate_rows(std::span<const ScoreRow> rows);

// Mean and median over every row regardless of source (source "all").
std::vector<ScoreRow> pooled_rows(std::span<const ScoreRow> rows);

}  // namespace cmsep::metrics
