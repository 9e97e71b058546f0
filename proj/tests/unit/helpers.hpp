#pragma once

#include <cmath>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/rng.hpp"
#include "iact/core/tensor.hpp"
#include "iact/model/config.hpp"

namespace iact::test {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

/// Plain triple-loop product used as the matmul oracle.
template <typename T>
Tensor<T> naive_matmul(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<T>(s);
    }
  return c;
}

template <typename T>
Tensor<T> naive_softmax_rows(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double m = -INFINITY, s = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) m = std::max(m, static_cast<double>(x(i, j)));
    for (std::size_t j = 0; j < x.cols(); ++j) s += std::exp(x(i, j) - m);
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = static_cast<T>(std::exp(x(i, j) - m) / s);
  }
  return y;
}

/// Desk profile without dropout, so forward passes are deterministic.
inline ModelConfig quiet_desk() {
  ModelConfig c = ModelConfig::desk();
  c.dropout = 0.0;
  return c;
}

}  // namespace iact::test

#include "iact/policy/model.hpp"

namespace iact::test {

template <typename T>
ModelInput<T> random_input(Rng& rng, const ModelConfig& c) {
  ModelInput<T> in;
  for (std::size_t i = 0; i < c.action_dim(); ++i) in.qpos.push_back(static_cast<T>(rng.normal()));
  if (c.use_visual) {
    Tensor<T> img({c.image_height, c.image_width, c.image_channels});
    for (auto& v : img.storage()) v = static_cast<T>(rng.uniform());
    in.image = img;
  }
  return in;
}

/// Rows [begin, begin + n) of a matrix.
template <typename T>
Tensor<T> rows_of(const Tensor<T>& m, std::size_t begin, std::size_t n) {
  Tensor<T> out({n, m.cols()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(begin + i, j);
  return out;
}

}  // namespace iact::test
