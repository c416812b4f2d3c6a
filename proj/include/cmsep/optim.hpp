#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmsep/autograd.hpp"

namespace cmsep::optim {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moments for one parameter array.
template <typename T>
struct AdamMoments {
  std::vector<T> first;
  std::vector<T> second;
};

// One bias-corrected ADAM update of `param` in place. `step` is the 1-based
// index of this update. Throws std::invalid_argument on size mismatch.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::int64_t step, const AdamConfig& config);

// ADAM over a fixed list of parameter tensors, reading their grads.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ag::Tensor<T>> params, AdamConfig config = {});

  void step();
  void zero_grad();
  std::int64_t steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<ag::Tensor<T>> params_;
  std::vector<AdamMoments<T>> moments_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

}  // namespace cmsep::optim
