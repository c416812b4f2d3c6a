#include "cmsep/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "cmsep/metrics.hpp"
#include "json.hpp"

namespace cmsep::dataset {

using json = nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::vector<Entry> Manifest::split(Split s) const {
  std::vector<Entry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

namespace {

// Both sides are taken relative to the working directory first.
std::string rel(const std::filesystem::path& p, const std::filesystem::path& base) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path abs = fs::absolute(p, ec);
  const fs::path dir = fs::absolute(base.empty() ? fs::path(".") : base, ec);
  auto r = fs::relative(abs, dir, ec);
  return ec || r.empty() ? abs.generic_string() : r.generic_string();
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over a combined key
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a * 1000003ull + b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double rms(const std::vector<float>& x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : std::sqrt(e / static_cast<double>(x.size()));
}

void normalize_rms(std::vector<float>& x, double target) {
  const double r = rms(x);
  if (r <= 0.0) return;
  const double g = target / r;
  for (float& v : x) v = static_cast<float>(v * g);
}

}  // namespace

void Manifest::save(const std::filesystem::path& path) const {
  const auto base = path.parent_path();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  json header = {{"schema", "cmsep-manifest"},
                 {"version", 1},
                 {"augmentation",
                  {{"gain_min", augmentation.gain_min},
                   {"gain_max", augmentation.gain_max},
                   {"shift", "circular, uniform over song length"},
                   {"cross_song_remix", augmentation.cross_song_remix}}}};
  out << header.dump() << '\n';
  for (const auto& e : entries) {
    json j = {{"id", e.id},
              {"mixture", rel(e.mixture, base)},
              {"voice", rel(e.voice, base)},
              {"accompaniment", rel(e.accompaniment, base)},
              {"split", to_string(e.split)},
              {"snr_db", std::isfinite(e.snr_db) ? json(e.snr_db) : json(nullptr)},
              {"seed", e.seed},
              {"voice_gain", e.voice_gain},
              {"acc_gain", e.acc_gain},
              {"voice_shift", e.voice_shift},
              {"acc_shift", e.acc_shift},
              {"acc_source", e.acc_source}};
    out << j.dump() << '\n';
  }
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!header_seen) {
      if (j.value("schema", "") != "cmsep-manifest" || j.value("version", 0) != 1)
        throw std::runtime_error("manifest header missing or unsupported: " + path.string());
      if (j.contains("augmentation")) {
        const auto& a = j["augmentation"];
        m.augmentation.gain_min = a.value("gain_min", m.augmentation.gain_min);
        m.augmentation.gain_max = a.value("gain_max", m.augmentation.gain_max);
        m.augmentation.cross_song_remix =
            a.value("cross_song_remix", m.augmentation.cross_song_remix);
      }
      header_seen = true;
      continue;
    }
    try {
      Entry e;
      e.id = j.at("id").get<std::string>();
      e.mixture = resolve(j.at("mixture").get<std::string>(), base);
      e.voice = resolve(j.at("voice").get<std::string>(), base);
      e.accompaniment = resolve(j.at("accompaniment").get<std::string>(), base);
      e.split = parse_split(j.at("split").get<std::string>());
      e.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("snr_db").get<double>();
      e.seed = j.value("seed", std::uint64_t{0});
      e.voice_gain = j.value("voice_gain", 1.0);
      e.acc_gain = j.value("acc_gain", 1.0);
      e.voice_shift = j.value("voice_shift", std::size_t{0});
      e.acc_shift = j.value("acc_shift", std::size_t{0});
      e.acc_source = j.value("acc_source", std::string{});
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!header_seen) throw std::runtime_error("empty manifest: " + path.string());
  return m;
}

Song synthesize_song(int index, double seconds, int sample_rate, std::uint64_t seed) {
  if (seconds <= 0.0 || sample_rate <= 0) throw std::invalid_argument("bad synthetic song spec");
  std::mt19937_64 rng(mix_seed(seed, 7777, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const double sr = sample_rate;
  const double nyquist = 0.5 * sr;
  const double two_pi = 2.0 * M_PI;

  Song song;
  song.name = "song" + std::to_string(index);
  song.voice = {std::vector<float>(n, 0.0f), sample_rate};
  song.accompaniment = {std::vector<float>(n, 0.0f), sample_rate};

  // Voice: notes on a pentatonic grid over ~200-400 Hz.
  static constexpr double kScale[] = {1.0, 9.0 / 8, 5.0 / 4, 3.0 / 2, 5.0 / 3, 2.0};
  const double base = 190.0 + 30.0 * uni(rng);
  const double vib_rate = 4.5 + uni(rng);
  {
    double t0 = 0.05 * uni(rng);
    double phase = 0.0;
    std::size_t i = 0;
    while (i < n) {
      const double note_len = 0.25 + 0.35 * uni(rng);
      const double gap = 0.05 + 0.1 * uni(rng);
      const double f0 = base * kScale[static_cast<int>(uni(rng) * 6) % 6];
      const double glide = 1.0 + 0.04 * (uni(rng) - 0.5);
      const auto start = static_cast<std::size_t>(t0 * sr);
      const auto stop = std::min(n, static_cast<std::size_t>((t0 + note_len) * sr));
      for (i = start; i < stop; ++i) {
        const double t = (i - start) / sr;
        const double frac = t / note_len;
        const double f = f0 * (1.0 + (glide - 1.0) * frac) *
                         (1.0 + 0.015 * std::sin(two_pi * vib_rate * (i / sr)));
        phase += two_pi * f / sr;
        const double env = std::min({1.0, t / 0.02, (note_len - t) / 0.03});
        double s = 0.0;
        for (int h = 1; h <= 8 && h * f < 0.8 * nyquist; ++h)
          s += std::sin(h * phase) / h * (h == 2 || h == 3 ? 1.4 : 1.0);
        song.voice.samples[i] = static_cast<float>(std::max(env, 0.0) * s);
      }
      t0 += note_len + gap;
      i = static_cast<std::size_t>(t0 * sr);
    }
  }

  // Accompaniment: a two-second bar repeated for the whole song.
  const double bar = 2.0;
  const double bass_root = 55.0 + 25.0 * uni(rng);
  double bass_pattern[4];
  for (double& b : bass_pattern) b = bass_root * kScale[static_cast<int>(uni(rng) * 4) % 4];
  const double chord_root = 2.0 * bass_root * (1.0 + 0.5 * uni(rng));
  std::normal_distribution<double> noise(0.0, 1.0);
  double hp_prev = 0.0, lp_state = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = i / sr;
    const double in_bar = std::fmod(t, bar);
    const int beat = static_cast<int>(in_bar / (bar / 4));
    const double since_beat = in_bar - beat * (bar / 4);
    const double fb = bass_pattern[beat];
    const double bass = std::exp(-since_beat * 3.0) *
                        (std::sin(two_pi * fb * t) + 0.4 * std::sin(two_pi * 2 * fb * t));
    double chord = 0.0;
    for (double ratio : {1.0, 5.0 / 4, 3.0 / 2}) {
      const double f = chord_root * ratio * (static_cast<int>(t / bar) % 2 ? 9.0 / 8 : 1.0);
      if (f < 0.8 * nyquist) chord += 0.25 * std::sin(two_pi * f * t);
      if (2 * f < 0.8 * nyquist) chord += 0.1 * std::sin(two_pi * 2 * f * t);
    }
    // Percussion: high-passed noise bursts on eighth notes.
    const double since_hit = std::fmod(in_bar, bar / 8);
    const double w = noise(rng);
    const double hp = w - hp_prev;
    hp_prev = w;
    lp_state += 0.5 * (hp - lp_state);
    const double perc = 0.6 * std::exp(-since_hit * 40.0) * lp_state;
    song.accompaniment.samples[i] = static_cast<float>(0.8 * bass + chord + perc);
  }

  normalize_rms(song.voice.samples, 0.1);
  normalize_rms(song.accompaniment.samples, 0.1);
  return song;
}

std::vector<Song> load_stems(const std::filesystem::path& dir, int sample_rate) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("stems directory not found: " + dir.string());
  std::vector<std::filesystem::path> subdirs;
  for (const auto& d : std::filesystem::directory_iterator(dir))
    if (d.is_directory()) subdirs.push_back(d.path());
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<Song> songs;
  for (const auto& d : subdirs) {
    const auto v = d / "voice.wav";
    const auto a = d / "accompaniment.wav";
    const bool hv = std::filesystem::exists(v), ha = std::filesystem::exists(a);
    if (!hv && !ha) continue;
    if (hv != ha)
      throw std::runtime_error("unpaired stems in " + d.string() +
                               " (need voice.wav and accompaniment.wav)");
    Song s;
    s.name = d.filename().string();
    s.voice = audio_io::read_wav(v);
    s.accompaniment = audio_io::read_wav(a);
    if (sample_rate > 0) {
      s.voice = audio_io::resample(s.voice, sample_rate);
      s.accompaniment = audio_io::resample(s.accompaniment, sample_rate);
    }
    if (s.voice.sample_rate != s.accompaniment.sample_rate)
      throw std::runtime_error("stem sample rates differ in " + d.string());
    const std::size_t len = std::min(s.voice.size(), s.accompaniment.size());
    s.voice.samples.resize(len);
    s.accompaniment.samples.resize(len);
    songs.push_back(std::move(s));
  }
  if (songs.empty()) throw std::runtime_error("no stem pairs found under " + dir.string());
  return songs;
}

double gain_for_snr(const Waveform& voice, const Waveform& acc, double snr_db) {
  double ev = 0.0, ea = 0.0;
  for (float v : voice.samples) ev += static_cast<double>(v) * v;
  for (float v : acc.samples) ea += static_cast<double>(v) * v;
  if (ev <= 0.0 || ea <= 0.0) throw std::invalid_argument("gain_for_snr: silent stem");
  return std::sqrt(std::pow(10.0, snr_db / 10.0) * ea / ev);
}

Manifest make_dataset(const std::vector<Song>& songs, const std::filesystem::path& out_dir,
                      const BuildOptions& options) {
  if (songs.empty()) throw std::invalid_argument("make_dataset: empty source set");
  const int n = static_cast<int>(songs.size());
  if (options.val_songs < 0 || options.test_songs < 0 ||
      options.val_songs + options.test_songs > n)
    throw std::invalid_argument("make_dataset: more val/test songs than songs");
  for (const auto& s : songs)
    if (s.voice.sample_rate != s.accompaniment.sample_rate ||
        s.voice.size() != s.accompaniment.size())
      throw std::invalid_argument("make_dataset: unpaired stems for " + s.name);

  std::filesystem::create_directories(out_dir);
  Manifest manifest;
  manifest.augmentation = options.ranges;

  const int n_train = n - options.val_songs - options.test_songs;
  auto split_of = [&](int i) {
    if (i < n_train) return Split::Train;
    if (i < n_train + options.val_songs) return Split::Val;
    return Split::Test;
  };

  auto emit = [&](Entry e, Waveform voice, Waveform acc) {
    if (options.target_snr_db) {
      const double g = gain_for_snr(voice, acc, *options.target_snr_db);
      for (float& v : voice.samples) v = static_cast<float>(v * g);
      e.voice_gain *= g;
    }
    Waveform mix{std::vector<float>(voice.size()), voice.sample_rate};
    for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] = voice.samples[i] + acc.samples[i];
    double ea = 0.0;
    for (float v : acc.samples) ea += static_cast<double>(v) * v;
    e.snr_db = ea > 0.0 ? metrics::snr_db(voice, acc) : std::numeric_limits<double>::infinity();

    const auto dir = out_dir / e.id;
    std::filesystem::create_directories(dir);
    e.mixture = dir / "mixture.wav";
    e.voice = dir / "voice.wav";
    e.accompaniment = dir / "accompaniment.wav";
    audio_io::write_wav(mix, e.mixture);
    audio_io::write_wav(voice, e.voice);
    audio_io::write_wav(acc, e.accompaniment);
    manifest.entries.push_back(std::move(e));
  };

  for (int i = 0; i < n; ++i) {
    Entry e;
    e.id = songs[i].name;
    e.split = split_of(i);
    e.seed = mix_seed(options.seed, static_cast<std::uint64_t>(i), 0);
    e.acc_source = songs[i].name;
    emit(std::move(e), songs[i].voice, songs[i].accompaniment);
  }

  const AugmentRanges& r = options.ranges;
  for (int i = 0; i < n_train; ++i) {
    for (int a = 1; a <= options.augment_factor; ++a) {
      Entry e;
      e.id = songs[i].name + "_aug" + std::to_string(a);
      e.split = Split::Train;
      e.seed = mix_seed(options.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(a));
      std::mt19937_64 rng(e.seed);
      std::uniform_real_distribution<double> gain(r.gain_min, r.gain_max);
      e.voice_gain = gain(rng);
      e.acc_gain = gain(rng);
      int other = i;
      if (r.cross_song_remix && n_train > 1) {
        std::uniform_int_distribution<int> pick(0, n_train - 2);
        other = pick(rng);
        if (other >= i) ++other;
      }
      const Waveform& v_src = songs[i].voice;
      const Waveform& a_src = songs[other].accompaniment;
      std::uniform_int_distribution<std::size_t> vshift(0, v_src.size() - 1);
      std::uniform_int_distribution<std::size_t> ashift(0, a_src.size() - 1);
      e.voice_shift = vshift(rng);
      e.acc_shift = ashift(rng);
      e.acc_source = songs[other].name;

      const std::size_t len = v_src.size();
      Waveform voice{std::vector<float>(len), v_src.sample_rate};
      Waveform acc{std::vector<float>(len), v_src.sample_rate};
      for (std::size_t k = 0; k < len; ++k) {
        voice.samples[k] = static_cast<float>(e.voice_gain * v_src.samples[(k + e.voice_shift) % len]);
        acc.samples[k] = static_cast<float>(
            e.acc_gain * a_src.samples[(k + e.acc_shift) % a_src.size()]);
      }
      emit(std::move(e), std::move(voice), std::move(acc));
    }
  }

  manifest.save(out_dir / "manifest.jsonl");
  return manifest;
}

LoadedEntry load_entry(const Entry& e, int sample_rate) {
  LoadedEntry out;
  out.entry = e;
  out.mixture = audio_io::read_wav(e.mixture);
  out.voice = audio_io::read_wav(e.voice);
  out.accompaniment = audio_io::read_wav(e.accompaniment);
  if (sample_rate > 0) {
    out.mixture = audio_io::resample(out.mixture, sample_rate);
    out.voice = audio_io::resample(out.voice, sample_rate);
    out.accompaniment = audio_io::resample(out.accompaniment, sample_rate);
  }
  if (out.mixture.size() != out.voice.size() || out.mixture.size() != out.accompaniment.size())
    throw std::runtime_error("entry " + e.id + ": stem lengths differ");
  return out;
}

}  // namespace cmsep::dataset
