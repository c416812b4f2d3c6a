#include "cmsep/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cmsep {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void f32(float v) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, sizeof raw);
    u32(raw);
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32() {
    const std::uint32_t raw = u32();
    float v;
    std::memcpy(&v, &raw, sizeof v);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw std::runtime_error("checkpoint truncated");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const Checkpoint::Array* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw std::runtime_error("checkpoint metadata missing key: " + key);
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.raw("CMCK", 4);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    if (a.values.size() != ag::numel(a.shape))
      throw std::invalid_argument("checkpoint array " + a.name + " size/shape mismatch");
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t e : a.shape) w.u32(static_cast<std::uint32_t>(e));
    for (float v : a.values) w.f32(v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  try {
    if (r.take(4) != "CMCK") throw std::runtime_error("not a checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
      throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    const std::uint32_t nmeta = r.u32();
    for (std::uint32_t i = 0; i < nmeta; ++i) {
      std::string k = r.str();
      ckpt.metadata[k] = r.str();
    }
    const std::uint32_t narrays = r.u32();
    for (std::uint32_t i = 0; i < narrays; ++i) {
      Checkpoint::Array a;
      a.name = r.str();
      const std::uint32_t rank = r.u32();
      if (rank == 0 || rank > 8) throw std::runtime_error("bad rank for array " + a.name);
      for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.u32());
      a.values.resize(ag::numel(a.shape));
      for (float& v : a.values) v = r.f32();
      ckpt.arrays.push_back(std::move(a));
    }
    if (!r.done()) throw std::runtime_error("trailing bytes");
    return ckpt;
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

template <typename T>
void store_parameters(Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params) {
  for (const auto& p : params) {
    Checkpoint::Array a;
    a.name = p.name;
    a.shape = p.tensor.shape();
    a.values.assign(p.tensor.values().begin(), p.tensor.values().end());
    ckpt.arrays.push_back(std::move(a));
  }
}

template <typename T>
void restore_parameters(const Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params) {
  if (ckpt.arrays.size() != params.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(ckpt.arrays.size()) +
                             " arrays, model expects " + std::to_string(params.size()));
  for (const auto& p : params) {
    const Checkpoint::Array* a = ckpt.find(p.name);
    if (!a) throw std::runtime_error("checkpoint missing parameter " + p.name);
    if (a->shape != p.tensor.shape())
      throw std::runtime_error("checkpoint parameter " + p.name + " has shape " +
                               ag::to_string(a->shape) + ", model expects " +
                               ag::to_string(p.tensor.shape()));
    auto dst = ag::Tensor<T>(p.tensor).mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a->values[i]);
  }
}

template void store_parameters<float>(Checkpoint&, const std::vector<NamedParameter<float>>&);
template void store_parameters<double>(Checkpoint&, const std::vector<NamedParameter<double>>&);
template void restore_parameters<float>(const Checkpoint&,
                                        const std::vector<NamedParameter<float>>&);
template void restore_parameters<double>(const Checkpoint&,
                                         const std::vector<NamedParameter<double>>&);

}  // namespace cmsep
