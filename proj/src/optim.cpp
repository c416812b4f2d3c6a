#include "cmsep/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cmsep::optim {

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::int64_t step, const AdamConfig& config) {
  if (grad.size() != param.size())
    throw std::invalid_argument("adam: gradient has " + std::to_string(grad.size()) +
                                " entries, parameter has " + std::to_string(param.size()));
  if (step < 1) throw std::invalid_argument("adam: step index must start at 1");
  if (moments.first.size() != param.size()) {
    moments.first.assign(param.size(), T(0));
    moments.second.assign(param.size(), T(0));
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * moments.first[i] + (1.0 - b1) * g;
    const double v = b2 * moments.second[i] + (1.0 - b2) * g * g;
    moments.first[i] = static_cast<T>(m);
    moments.second[i] = static_cast<T>(v);
    const double update = config.lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
    param[i] = static_cast<T>(param[i] - update);
  }
}

template <typename T>
Adam<T>::Adam(std::vector<ag::Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {
  for (const auto& p : params_)
    if (!p.requires_grad()) throw std::invalid_argument("adam: parameter does not require grad");
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    adam_update<T>(p.mutable_values(), p.grad(), moments_[i], step_, config_);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_update<float>(std::span<float>, std::span<const float>, AdamMoments<float>&,
                                 std::int64_t, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>,
                                  AdamMoments<double>&, std::int64_t, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace cmsep::optim
