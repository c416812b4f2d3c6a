#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmsep/audio_io.hpp"

namespace cmsep::dataset {

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct Entry {
  std::string id;
  std::filesystem::path mixture;
  std::filesystem::path voice;
  std::filesystem::path accompaniment;
  Split split = Split::Train;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  // Augmentation record; identity for original songs.
  double voice_gain = 1.0;
  double acc_gain = 1.0;
  std::size_t voice_shift = 0;
  std::size_t acc_shift = 0;
  std::string acc_source;
};

// Augmentation ranges, stored in the manifest header so runs are
// reproducible from the manifest alone.
struct AugmentRanges {
  double gain_min = 0.25;
  double gain_max = 1.25;
  // Circular shifts are uniform over the whole song length.
  bool cross_song_remix = true;
};

// JSON lines: a header object {"schema": "cmsep-manifest", "version": 1,
// "augmentation": {...}} followed by one object per entry. Relative paths
// are stored relative to the manifest's directory.
struct Manifest {
  AugmentRanges augmentation;
  std::vector<Entry> entries;

  std::vector<Entry> split(Split s) const;
  void save(const std::filesystem::path& path) const;
  static Manifest load(const std::filesystem::path& path);
};

struct Song {
  std::string name;
  Waveform voice;
  Waveform accompaniment;
};

// Desk-scale stand-ins for real stems: the "voice" is a gliding harmonic
// stack with vibrato and syllable envelopes, the "accompaniment" a repeating
// bass line, sustained chord partials and filtered-noise percussion.
struct SyntheticSpec {
  int songs = 2;
  double seconds = 10.0;
  int sample_rate = 16000;
};

Song synthesize_song(int index, double seconds, int sample_rate, std::uint64_t seed);

// Reads <dir>/<song>/voice.wav and <dir>/<song>/accompaniment.wav for each
// subdirectory, resampling to `sample_rate` (0 keeps the file rate).
std::vector<Song> load_stems(const std::filesystem::path& dir, int sample_rate);

struct BuildOptions {
  std::uint64_t seed = 0;
  // Augmented copies per training song.
  int augment_factor = 0;
  // Songs assigned (from the end of the list) to validation and test.
  int val_songs = 0;
  int test_songs = 0;
  // When set, every entry's voice is rescaled to this SNR against its
  // accompaniment.
  std::optional<double> target_snr_db;
  AugmentRanges ranges;
};

// Gain g with |g*voice|^2 / |acc|^2 = 10^(snr/10).
double gain_for_snr(const Waveform& voice, const Waveform& acc, double snr_db);

// Writes mixture/voice/accompaniment wavs under `out_dir` and returns the
// manifest (also saved as out_dir/manifest.jsonl).
Manifest make_dataset(const std::vector<Song>& songs, const std::filesystem::path& out_dir,
                      const BuildOptions& options);

struct LoadedEntry {
  Entry entry;
  Waveform mixture;
  Waveform voice;
  Waveform accompaniment;
};

// Reads the three files; resamples to `sample_rate` unless it is 0.
LoadedEntry load_entry(const Entry& e, int sample_rate = 0);

}  // namespace cmsep::dataset
