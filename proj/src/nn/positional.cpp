#include "iact/nn/positional.hpp"

#include <cmath>

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"

namespace iact::nn {

template <typename T>
Tensor<T> sinusoidal_pe(std::size_t n, std::size_t d) {
  if (d == 0 || d % 2 != 0) throw ConfigError("sinusoidal_pe: width must be even and positive, got " + std::to_string(d));
  if (n == 0) throw ConfigError("sinusoidal_pe: need at least one position");
  Tensor<T> pe({n, d});
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t j = 0; j < d / 2; ++j) {
      const double rate = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(d));
      const double angle = static_cast<double>(p) * rate;
      pe(p, 2 * j) = static_cast<T>(std::sin(angle));
      pe(p, 2 * j + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
Tensor<T> sinusoidal_pe_2d(std::size_t h, std::size_t w, std::size_t d) {
  if (d % 4 != 0) throw ConfigError("sinusoidal_pe_2d: width must be a multiple of 4, got " + std::to_string(d));
  const std::size_t half = d / 2;
  const Tensor<T> row_table = sinusoidal_pe<T>(h, half);
  const Tensor<T> col_table = sinusoidal_pe<T>(w, half);
  Tensor<T> pe({h * w, d});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < half; ++c) {
        pe(y * w + x, c) = row_table(y, c);
        pe(y * w + x, half + c) = col_table(x, c);
      }
  return pe;
}

template <typename T>
PositionalEncoding<T> PositionalEncoding<T>::sinusoidal(std::size_t n_max, std::size_t d) {
  PositionalEncoding pe;
  pe.kind_ = Kind::kSinusoidal;
  pe.n_max_ = n_max;
  pe.table_ = sinusoidal_pe<T>(n_max, d);
  return pe;
}

template <typename T>
PositionalEncoding<T> PositionalEncoding<T>::learned(ParameterStore<T>& store, const std::string& name,
                                                     std::size_t n_max, std::size_t d, const Rng& init) {
  PositionalEncoding pe;
  pe.kind_ = Kind::kLearned;
  pe.n_max_ = n_max;
  Rng r = init.substream(name);
  Tensor<T> table({n_max, d});
  for (auto& v : table.storage()) v = static_cast<T>(0.1 * r.normal());
  pe.learned_ = &store.add(name, std::move(table));
  return pe;
}

template <typename T>
Var<T> PositionalEncoding<T>::rows(Graph<T>& g, std::size_t n) const {
  if (n == 0 || n > n_max_) {
    throw DimensionError("positional encoding: requested " + std::to_string(n) + " rows, capacity " +
                         std::to_string(n_max_));
  }
  if (kind_ == Kind::kLearned) {
    Var<T> full = g.parameter(*learned_);
    return n == n_max_ ? full : ops::slice_rows(full, 0, n);
  }
  const std::size_t d = table_.cols();
  return g.constant(Tensor<T>({n, d}, std::vector<T>(table_.data(), table_.data() + n * d)));
}

template Tensor<float> sinusoidal_pe<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_pe<double>(std::size_t, std::size_t);
template Tensor<float> sinusoidal_pe_2d<float>(std::size_t, std::size_t, std::size_t);
template Tensor<double> sinusoidal_pe_2d<double>(std::size_t, std::size_t, std::size_t);
template class PositionalEncoding<float>;
template class PositionalEncoding<double>;

}  // namespace iact::nn
