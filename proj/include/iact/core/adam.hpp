#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "iact/core/parameters.hpp"

namespace iact {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are keyed by parameter name and created
/// on first use; gradients are zeroed after every step.
template <typename T>
class Adam {
 public:
  struct Moments {
    Tensor<T> first;
    Tensor<T> second;
  };

  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Throws UsageError naming the parameter when a trainable parameter has no
  /// gradient slot.
  void step(ParameterStore<T>& params);

  std::int64_t steps() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace iact
