#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cmsep/separate.hpp"

namespace cmsep::ensemble {

// Per-sample arithmetic mean. Shorter inputs are zero padded to the longest.
// Throws std::invalid_argument on an empty list or mixed sample rates.
Waveform mca(std::span<const Waveform> waves);

struct Member {
  std::filesystem::path checkpoint;
  StftParams params;
};

// Text file: a "# cmsep-ensemble 1" header, then one member per line as
// "<checkpoint path> <window_len> <hop>". Relative paths resolve against the
// file's directory.
struct EnsembleSpec {
  std::vector<Member> members;

  static EnsembleSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Runs separate_song for each member with its own STFT, aligns every output
// to the input length, then averages per source.
std::pair<Waveform, Waveform> run_ensemble(const Waveform& wave,
                                           std::span<const SpectralSeparator* const> members,
                                           const SeparationOptions& options = {});

// Loads each checkpoint and checks that its recorded window/hop match the
// member entry.
std::pair<Waveform, Waveform> run_ensemble(const Waveform& wave, const EnsembleSpec& spec,
                                           const SeparationOptions& options = {});

}  // namespace cmsep::ensemble
