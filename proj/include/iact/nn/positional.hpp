#pragma once

#include <cstddef>

#include "iact/core/graph.hpp"
#include "iact/core/parameters.hpp"
#include "iact/core/rng.hpp"

namespace iact::nn {

/// Interleaved sine/cosine table: entry (p, 2j) = sin(p * 10000^(-2j/d)),
/// entry (p, 2j+1) = cos(same). Throws ConfigError for odd d.
template <typename T>
Tensor<T> sinusoidal_pe(std::size_t n, std::size_t d);

/// Row-major grid table for an h x w feature map: the first d/2 channels
/// encode the row index, the last d/2 the column index. Needs d % 4 == 0.
template <typename T>
Tensor<T> sinusoidal_pe_2d(std::size_t h, std::size_t w, std::size_t d);

/// Either a fixed sinusoidal table or a learned n_max x d embedding.
template <typename T>
class PositionalEncoding {
 public:
  enum class Kind { kSinusoidal, kLearned };

  PositionalEncoding() = default;
  static PositionalEncoding sinusoidal(std::size_t n_max, std::size_t d);
  static PositionalEncoding learned(ParameterStore<T>& store, const std::string& name, std::size_t n_max,
                                    std::size_t d, const Rng& init);

  Kind kind() const noexcept { return kind_; }
  std::size_t capacity() const noexcept { return n_max_; }
  /// Rows [0, n) as a graph value.
  Var<T> rows(Graph<T>& g, std::size_t n) const;

 private:
  Kind kind_ = Kind::kSinusoidal;
  std::size_t n_max_ = 0;
  Tensor<T> table_;
  Parameter<T>* learned_ = nullptr;
};

}  // namespace iact::nn
