#include "iact/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iact/core/error.hpp"

namespace iact::ops {
namespace {

template <typename T>
Graph<T>& graph_of(const Var<T>& a) {
  if (!a.attached()) throw UsageError("operation on a detached Var");
  return *a.graph();
}

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 operand, got " + shape_string(t.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Folds one bit per element into the graph's kink signature.
template <typename T, typename Pred>
void note_pattern(Graph<T>& g, const Tensor<T>& x, Pred pred) {
  if (!g.options().track_kinks) return;
  std::uint64_t word = 0;
  int bits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    word = (word << 2) | static_cast<std::uint64_t>(pred(x[i]));
    bits += 2;
    if (bits == 64) {
      g.note_kinks(word);
      word = 0;
      bits = 0;
    }
  }
  g.note_kinks(word ^ (static_cast<std::uint64_t>(x.size()) << 48));
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  if (B.rows() != k) {
    throw DimensionError("matmul: inner extents disagree: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Tensor<T> C({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    T* c = C.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = A(i, p);
      const T* brow = B.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(C), {a, b}, [ia, ib, n, k, m](Graph<T>& g, const Tensor<T>& dC) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& B = g.value(ib);
    if (T* dA = g.grad_ptr(ia)) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* dc = dC.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = B.data() + p * m;
          T acc = 0;
          for (std::size_t j = 0; j < m; ++j) acc += dc[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (T* dB = g.grad_ptr(ib)) {
      const T factor = g.options().corrupt_backward ? T(1.01) : T(1);
      for (std::size_t i = 0; i < n; ++i) {
        const T* dc = dC.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = A(i, p) * factor;
          T* db = dB + p * m;
          for (std::size_t j = 0; j < m; ++j) db[j] += aip * dc[j];
        }
      }
    }
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require_rank2(A, "matmul_nt");
  require_rank2(B, "matmul_nt");
  const std::size_t n = A.rows(), k = A.cols(), m = B.rows();
  if (B.cols() != k) {
    throw DimensionError("matmul_nt: widths disagree: " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  }
  Tensor<T> C({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = A.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T* brow = B.data() + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      C(i, j) = acc;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(C), {a, b}, [ia, ib, n, k, m](Graph<T>& g, const Tensor<T>& dC) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& B = g.value(ib);
    if (T* dA = g.grad_ptr(ia)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const T d = dC(i, j);
          const T* brow = B.data() + j * k;
          T* da = dA + i * k;
          for (std::size_t p = 0; p < k; ++p) da[p] += d * brow[p];
        }
      }
    }
    if (T* dB = g.grad_ptr(ib)) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* arow = A.data() + i * k;
        for (std::size_t j = 0; j < m; ++j) {
          const T d = dC(i, j);
          T* db = dB + j * k;
          for (std::size_t p = 0; p < k; ++p) db[p] += d * arow[p];
        }
      }
    }
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  require_rank2(A, "transpose");
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = A(i, j);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, r, c](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) da[i * c + j] += d(j, i);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
    if (T* db = g.grad_ptr(ib))
      for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i];
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
    if (T* db = g.grad_ptr(ib))
      for (std::size_t i = 0; i < d.size(); ++i) db[i] -= d[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& B = g.value(ib);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * B[i];
    if (T* db = g.grad_ptr(ib))
      for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * A[i];
  });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  const Tensor<T>& R = row.value();
  require_rank2(A, "add_row");
  if (R.size() != A.cols()) {
    throw DimensionError("add_row: row " + shape_string(R.shape()) + " does not match width of " + shape_string(A.shape()));
  }
  const std::size_t n = A.rows(), c = A.cols();
  Tensor<T> out = A;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += R[j];
  const std::size_t ia = a.id(), ir = row.id();
  return g.record(std::move(out), {a, row}, [ia, ir, n, c](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
    if (T* dr = g.grad_ptr(ir))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) dr[j] += d(i, j);
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Graph<T>& g = graph_of(a);
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= s;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, s](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Graph<T>& g = graph_of(a);
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v += s;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  note_pattern(g, A, [](T v) { return v > T(0) ? 1 : 0; });
  Tensor<T> out = A;
  for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& A = g.value(ia);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i)
        if (A[i] > T(0)) da[i] += d[i];
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v = std::exp(v);
  const std::size_t ia = a.id();
  const std::size_t iy = g.size();
  return g.record(std::move(out), {a}, [ia, iy](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& Y = g.value(iy);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * Y[i];
  });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  note_pattern(g, A, [](T v) { return v > T(0) ? 1 : (v < T(0) ? 2 : 0); });
  Tensor<T> out = A;
  for (auto& v : out.storage()) v = std::abs(v);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& A = g.value(ia);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (A[i] > T(0)) da[i] += d[i];
        else if (A[i] < T(0)) da[i] -= d[i];
      }
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v = v * v;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& A = g.value(ia);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += T(2) * A[i] * d[i];
  });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  note_pattern(g, A, [lo, hi](T v) { return v < lo ? 1 : (v > hi ? 2 : 0); });
  Tensor<T> out = A;
  for (auto& v : out.storage()) v = std::clamp(v, lo, hi);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, lo, hi](Graph<T>& g, const Tensor<T>& d) {
    const Tensor<T>& A = g.value(ia);
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i)
        if (A[i] >= lo && A[i] <= hi) da[i] += d[i];
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  Graph<T>& g = graph_of(x);
  const Tensor<T>& X = x.value();
  require_rank2(X, "softmax_rows");
  const std::size_t n = X.rows(), c = X.cols();
  Tensor<T> Y({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = X.data() + i * c;
    T* yr = Y.data() + i * c;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xr[j]);
    // Double accumulation keeps float rows within a few ulps of summing to 1.
    double total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] = static_cast<T>(yr[j] / total);
  }
  const std::size_t ix = x.id();
  // The closure needs the output; it is read back through its own id, which is
  // the next node to be appended.
  const std::size_t iy = g.size();
  return g.record(std::move(Y), {x}, [ix, iy, n, c](Graph<T>& g, const Tensor<T>& dY) {
    const Tensor<T>& Y = g.value(iy);
    T* dx = g.grad_ptr(ix);
    if (!dx) return;
    for (std::size_t i = 0; i < n; ++i) {
      const T* yr = Y.data() + i * c;
      const T* dr = dY.data() + i * c;
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += yr[j] * dr[j];
      for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += yr[j] * (dr[j] - dot);
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  Graph<T>& g = graph_of(x);
  const Tensor<T>& X = x.value();
  require_rank2(X, "layer_norm");
  const std::size_t n = X.rows(), c = X.cols();
  if (gain.value().size() != c || bias.value().size() != c) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.value().shape()) + "/" +
                         shape_string(bias.value().shape()) + " do not match width of " + shape_string(X.shape()));
  }
  if (!(eps > T(0))) throw DimensionError("layer_norm: eps must be positive");
  const Tensor<T>& G = gain.value();
  const Tensor<T>& B = bias.value();
  Tensor<T> Y({n, c});
  // Normalized values and inverse std are kept for the backward rule.
  Tensor<T> xhat({n, c});
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = X.data() + i * c;
    T mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= T(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(c);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (xr[j] - mu) * is;
      xhat(i, j) = h;
      Y(i, j) = h * G[j] + B[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record(std::move(Y), {x, gain, bias},
                  [ix, ig, ib, n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& g,
                                                                                          const Tensor<T>& dY) {
                    const Tensor<T>& G = g.value(ig);
                    if (T* dg = g.grad_ptr(ig))
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < c; ++j) dg[j] += dY(i, j) * xhat(i, j);
                    if (T* db = g.grad_ptr(ib))
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < c; ++j) db[j] += dY(i, j);
                    if (T* dx = g.grad_ptr(ix)) {
                      for (std::size_t i = 0; i < n; ++i) {
                        T m1 = 0, m2 = 0;
                        for (std::size_t j = 0; j < c; ++j) {
                          const T dh = dY(i, j) * G[j];
                          m1 += dh;
                          m2 += dh * xhat(i, j);
                        }
                        m1 /= T(c);
                        m2 /= T(c);
                        for (std::size_t j = 0; j < c; ++j) {
                          const T dh = dY(i, j) * G[j];
                          dx[i * c + j] += inv_std[i] * (dh - m1 - xhat(i, j) * m2);
                        }
                      }
                    }
                  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  require_rank2(A, "slice_rows");
  if (begin >= end || end > A.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(A.shape()));
  }
  const std::size_t c = A.cols();
  Tensor<T> out({end - begin, c},
                std::vector<T>(A.data() + begin * c, A.data() + end * c));
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, begin, c](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia)) {
      T* dst = da + begin * c;
      for (std::size_t i = 0; i < d.size(); ++i) dst[i] += d[i];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end) {
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  require_rank2(A, "slice_cols");
  if (begin >= end || end > A.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(A.shape()));
  }
  const std::size_t n = A.rows(), c = A.cols(), w = end - begin;
  Tensor<T> out({n, w});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = A(i, begin + j);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, begin, n, c, w](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) da[i * c + begin + j] += d(i, j);
  });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  Graph<T>& g = graph_of(parts.front());
  const std::size_t c = parts.front().value().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != c) {
      throw DimensionError("concat_rows: width mismatch " + shape_string(parts.front().value().shape()) + " vs " +
                           shape_string(p.value().shape()));
    }
    total += p.value().rows();
  }
  std::vector<T> data;
  data.reserve(total * c);
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    offsets.push_back(data.size());
    ids.push_back(p.id());
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return g.record(Tensor<T>({total, c}, std::move(data)), inputs,
                  [ids = std::move(ids), offsets = std::move(offsets)](Graph<T>& g, const Tensor<T>& d) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      T* dp = g.grad_ptr(ids[k]);
                      if (!dp) continue;
                      const std::size_t len = g.value(ids[k]).size();
                      const T* src = d.data() + offsets[k];
                      for (std::size_t i = 0; i < len; ++i) dp[i] += src[i];
                    }
                  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  Graph<T>& g = graph_of(parts.front());
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, offsets, widths;
  for (const auto& p : parts) {
    if (p.value().rows() != n) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().value().shape()) + " vs " +
                           shape_string(p.value().shape()));
    }
    ids.push_back(p.id());
    offsets.push_back(total);
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor<T> out({n, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& P = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out(i, offsets[k] + j) = P(i, j);
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), inputs,
                  [ids = std::move(ids), offsets = std::move(offsets), widths = std::move(widths), n,
                   total](Graph<T>& g, const Tensor<T>& d) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      T* dp = g.grad_ptr(ids[k]);
                      if (!dp) continue;
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) dp[i * widths[k] + j] += d[i * total + offsets[k] + j];
                    }
                  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::size_t rows, std::size_t cols) {
  Graph<T>& g = graph_of(a);
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.value().shape()) + " as " +
                         shape_string({rows, cols}));
  }
  Tensor<T> out({rows, cols}, a.value().storage());
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Graph<T>& g = graph_of(a);
  T total = 0;
  for (T v : a.value().storage()) total += v;
  const std::size_t ia = a.id();
  return g.record(Tensor<T>({1, 1}, std::vector<T>{total}), {a}, [ia](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia)) {
      const std::size_t len = g.value(ia).size();
      for (std::size_t i = 0; i < len; ++i) da[i] += d[0];
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / T(a.value().size()));
}

template <typename T>
Var<T> dropout(const Var<T>& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw UsageError("dropout rate must be < 1");
  Graph<T>& g = graph_of(a);
  const Tensor<T>& A = a.value();
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> mask(A.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < p ? T(0) : keep_scale;
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, mask = std::move(mask)](Graph<T>& g, const Tensor<T>& d) {
    if (T* da = g.grad_ptr(ia))
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * mask[i];
  });
}

template <typename T>
Var<T> patchify(const Var<T>& image, std::size_t height, std::size_t width, std::size_t patch) {
  Graph<T>& g = graph_of(image);
  const Tensor<T>& X = image.value();
  require_rank2(X, "patchify");
  if (X.rows() != height * width) {
    throw DimensionError("patchify: " + shape_string(X.shape()) + " is not a " + std::to_string(height) + "x" +
                         std::to_string(width) + " image");
  }
  if (patch == 0 || height % patch || width % patch) {
    throw DimensionError("patchify: image " + std::to_string(height) + "x" + std::to_string(width) +
                         " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t ch = X.cols();
  const std::size_t oh = height / patch, ow = width / patch;
  const std::size_t pw = patch * patch * ch;
  // index[o] = source element for output element o.
  std::vector<std::size_t> index(oh * ow * pw);
  std::size_t o = 0;
  for (std::size_t py = 0; py < oh; ++py)
    for (std::size_t px = 0; px < ow; ++px)
      for (std::size_t dy = 0; dy < patch; ++dy)
        for (std::size_t dx = 0; dx < patch; ++dx)
          for (std::size_t c = 0; c < ch; ++c)
            index[o++] = ((py * patch + dy) * width + (px * patch + dx)) * ch + c;
  Tensor<T> out({oh * ow, pw});
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = X[index[i]];
  const std::size_t ix = image.id();
  return g.record(std::move(out), {image}, [ix, index = std::move(index)](Graph<T>& g, const Tensor<T>& d) {
    if (T* dx = g.grad_ptr(ix))
      for (std::size_t i = 0; i < index.size(); ++i) dx[index[i]] += d[i];
  });
}

#define IACT_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                      \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                   \
  template Var<T> transpose(const Var<T>&);                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                     \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> add_scalar(const Var<T>&, T);                                              \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> exp(const Var<T>&);                                                        \
  template Var<T> abs(const Var<T>&);                                                        \
  template Var<T> square(const Var<T>&);                                                     \
  template Var<T> clamp(const Var<T>&, T, T);                                                \
  template Var<T> softmax_rows(const Var<T>&);                                               \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                       \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                       \
  template Var<T> concat_rows(std::span<const Var<T>>);                                      \
  template Var<T> concat_cols(std::span<const Var<T>>);                                      \
  template Var<T> reshape(const Var<T>&, std::size_t, std::size_t);                          \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> dropout(const Var<T>&, double, Rng&);                                      \
  template Var<T> patchify(const Var<T>&, std::size_t, std::size_t, std::size_t);

IACT_INSTANTIATE_OPS(float)
IACT_INSTANTIATE_OPS(double)

#undef IACT_INSTANTIATE_OPS

}  // namespace iact::ops
