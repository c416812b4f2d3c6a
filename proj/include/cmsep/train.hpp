#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "cmsep/dataset.hpp"
#include "cmsep/separate.hpp"

namespace cmsep::train {

struct TrainConfig {
  model::ModelConfig model;
  StftParams stft;
  Target target = Target::CirmCs;
  double lr = 5e-5;
  int epochs = 35;
  int frames_per_example = 1250;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir = "checkpoints";
  // Random crops drawn from each training entry per epoch.
  int crops_per_song = 1;

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::vector<EpochLog> log;
  // Loss of every optimizer step, in order.
  std::vector<double> step_losses;
  double initial_val_loss = 0.0;
};

// Spectrograms of one entry, computed once and cropped per step.
struct SongSpectra {
  std::string id;
  ComplexSpectrogram mixture, voice, accompaniment;
};

SongSpectra song_spectra(const dataset::LoadedEntry& entry, const StftParams& params);

// Frames [start, start + count) of a spectrogram.
ComplexSpectrogram crop_frames(const ComplexSpectrogram& spec, std::size_t start,
                               std::size_t count);

// Loss for the configured target on one (possibly cropped) example.
double example_loss(const ModelSeparator& sep, const SongSpectra& song);

// Mean loss over each song tiled into frames_per_example chunks, weighted by
// chunk length.
double validation_loss(const ModelSeparator& sep, const std::vector<SongSpectra>& songs,
                       int frames_per_example);

// Trains on in-memory spectra. Writes <checkpoint_dir>/best.ckpt (the
// lowest validation loss, initialization included) and train_log.csv.
TrainResult train(const std::vector<SongSpectra>& train_set,
                  const std::vector<SongSpectra>& val_set, const TrainConfig& config);

// Loads the manifest's train and val splits, then trains.
TrainResult train(const dataset::Manifest& manifest, const TrainConfig& config);

}  // namespace cmsep::train
