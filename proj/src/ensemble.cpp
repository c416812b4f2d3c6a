#include "cmsep/ensemble.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace cmsep::ensemble {

Waveform mca(std::span<const Waveform> waves) {
  if (waves.empty()) throw std::invalid_argument("mca: no waveforms to average");
  const int rate = waves.front().sample_rate;
  std::size_t len = 0;
  for (const auto& w : waves) {
    if (w.sample_rate != rate) throw std::invalid_argument("mca: sample rates differ");
    len = std::max(len, w.size());
  }
  std::vector<double> acc(len, 0.0);
  for (const auto& w : waves)
    for (std::size_t i = 0; i < w.size(); ++i) acc[i] += w.samples[i];
  const double p = static_cast<double>(waves.size());
  Waveform out{std::vector<float>(len), rate};
  for (std::size_t i = 0; i < len; ++i) out.samples[i] = static_cast<float>(acc[i] / p);
  return out;
}

EnsembleSpec EnsembleSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ensemble spec: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# cmsep-ensemble 1", 0) != 0)
    throw std::runtime_error("ensemble spec missing '# cmsep-ensemble 1' header: " +
                             path.string());
  EnsembleSpec spec;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ckpt;
    Member m;
    if (!(ls >> ckpt >> m.params.window_len >> m.params.hop))
      throw std::runtime_error("ensemble spec line " + std::to_string(lineno) +
                               ": expected '<checkpoint> <window_len> <hop>'");
    m.checkpoint = ckpt;
    if (m.checkpoint.is_relative()) m.checkpoint = path.parent_path() / m.checkpoint;
    spec.members.push_back(std::move(m));
  }
  if (spec.members.empty()) throw std::runtime_error("ensemble spec lists no members");
  return spec;
}

void EnsembleSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ensemble spec: " + path.string());
  out << "# cmsep-ensemble 1\n";
  for (const auto& m : members)
    out << m.checkpoint.string() << ' ' << m.params.window_len << ' ' << m.params.hop << '\n';
}

std::pair<Waveform, Waveform> run_ensemble(const Waveform& wave,
                                           std::span<const SpectralSeparator* const> members,
                                           const SeparationOptions& options) {
  if (members.empty()) throw std::invalid_argument("ensemble has no members");
  const int rate = members.front()->stft_params().sample_rate;
  for (const auto* m : members)
    if (m->stft_params().sample_rate != rate)
      throw std::invalid_argument("ensemble members disagree on sample rate");

  std::vector<Waveform> voices(members.size()), accs(members.size());
  const auto count = static_cast<std::ptrdiff_t>(members.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      auto [v, a] = separate_song(wave, *members[static_cast<std::size_t>(i)], options);
      v.samples.resize(wave.size(), 0.0f);
      a.samples.resize(wave.size(), 0.0f);
      voices[static_cast<std::size_t>(i)] = std::move(v);
      accs[static_cast<std::size_t>(i)] = std::move(a);
    } catch (...) {
#pragma omp critical(cmsep_ensemble_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return {mca(voices), mca(accs)};
}

std::pair<Waveform, Waveform> run_ensemble(const Waveform& wave, const EnsembleSpec& spec,
                                           const SeparationOptions& options) {
  std::vector<std::unique_ptr<ModelSeparator>> owned;
  std::vector<const SpectralSeparator*> members;
  for (const auto& m : spec.members) {
    auto sep = ModelSeparator::load(m.checkpoint);
    const StftParams& p = sep->stft_params();
    if (p.window_len != m.params.window_len || p.hop != m.params.hop) {
      throw std::runtime_error("checkpoint " + m.checkpoint.string() + " was trained with window " +
                               std::to_string(p.window_len) + "/hop " + std::to_string(p.hop) +
                               ", ensemble spec says " + std::to_string(m.params.window_len) +
                               "/" + std::to_string(m.params.hop));
    }
    members.push_back(sep.get());
    owned.push_back(std::move(sep));
  }
  return run_ensemble(wave, members, options);
}

}  // namespace cmsep::ensemble
