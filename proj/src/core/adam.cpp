#include "iact/core/adam.hpp"

#include <cmath>

#include "iact/core/error.hpp"

namespace iact {

template <typename T>
void Adam<T>::step(ParameterStore<T>& params) {
  for (auto& [name, p] : params) {
    if (p.trainable && p.grad.shape() != p.value.shape()) {
      throw UsageError("adam step: missing gradient for parameter " + name);
    }
  }
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_.emplace(name, Moments{Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape())}).first;
    }
    Moments& m = it->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      m.first[i] = T(b1 * m.first[i] + (1.0 - b1) * g);
      m.second[i] = T(b2 * m.second[i] + (1.0 - b2) * g * g);
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      p.value[i] = T(p.value[i] - options_.lr * mhat / (std::sqrt(vhat) + options_.eps));
    }
    p.grad.fill(T(0));
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace iact
