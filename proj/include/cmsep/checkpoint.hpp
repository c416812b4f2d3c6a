#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmsep/autograd.hpp"

namespace cmsep {

// Versioned binary container of named float32 arrays plus string metadata.
//
// Layout (little-endian): "CMCK", u32 version, u32 metadata count, then
// (u32 len, key bytes, u32 len, value bytes) per entry in key order, u32
// array count, then per array: u32 name len, name bytes, u32 rank, u32
// extents, float32 values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  struct Array {
    std::string name;
    ag::Shape shape;
    std::vector<float> values;
  };

  std::map<std::string, std::string> metadata;
  std::vector<Array> arrays;

  const Array* find(const std::string& name) const;
  // Throws std::runtime_error naming the key when absent.
  const std::string& meta(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
struct NamedParameter {
  std::string name;
  ag::Tensor<T> tensor;
};

template <typename T>
void store_parameters(Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params);

// Copies values into the given tensors. Throws std::runtime_error when a
// name is missing, a shape differs, or the checkpoint holds extra arrays.
template <typename T>
void restore_parameters(const Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params);

}  // namespace cmsep
