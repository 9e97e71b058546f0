#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/rng.hpp"

// Differentiable rank-2 operations. All inputs must belong to the same graph.
namespace iact::ops {

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a * b^T without materializing the transpose.
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
/// a + row, with `row` of shape 1 x cols broadcast over every row of a.
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);

template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
/// Elementwise clamp; zero gradient outside [lo, hi].
template <typename T> Var<T> clamp(const Var<T>& a, T lo, T hi);

/// Row-wise softmax with max subtraction.
template <typename T> Var<T> softmax_rows(const Var<T>& x);
/// Per-row normalization to zero mean / unit variance, then gain and bias
/// (each 1 x cols).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps);

template <typename T> Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);
template <typename T> Var<T> reshape(const Var<T>& a, std::size_t rows, std::size_t cols);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

/// Inverted dropout: zeroes each entry with probability p and scales the
/// survivors by 1/(1-p). Identity when p == 0.
template <typename T> Var<T> dropout(const Var<T>& a, double p, Rng& rng);

/// Non-overlapping square patches of an image stored as (height*width) x
/// channels, row-major pixels. Output is one row per patch, (patch*patch*
/// channels) wide, ordered (dy, dx, channel). Height and width must be
/// multiples of `patch`.
template <typename T>
Var<T> patchify(const Var<T>& image, std::size_t height, std::size_t width, std::size_t patch);

}  // namespace iact::ops
