#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/parameters.hpp"
#include "iact/core/rng.hpp"

namespace iact::nn {

/// Whether stochastic layers are active, and where their randomness comes
/// from. Train mode with a nonzero dropout rate requires `dropout_rng`.
struct Mode {
  bool train = false;
  Rng* dropout_rng = nullptr;
};

template <typename T>
Var<T> apply_dropout(const Var<T>& x, double p, const Mode& mode);

/// x * W + b with W stored in x out. Xavier-uniform weights, zero bias.
template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  static Linear create(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                       const Rng& init);
  std::size_t in_features() const { return weight->value.rows(); }
  std::size_t out_features() const { return weight->value.cols(); }
  Var<T> operator()(Graph<T>& g, const Var<T>& x) const;
};

template <typename T>
struct LayerNorm {
  static constexpr double kEps = 1e-5;
  Parameter<T>* gain = nullptr;
  Parameter<T>* bias = nullptr;

  static LayerNorm create(ParameterStore<T>& store, const std::string& name, std::size_t width);
  Var<T> operator()(Graph<T>& g, const Var<T>& x) const;
};

template <typename T>
struct AttentionOutput {
  Var<T> output;
  /// One n_q x n_k row-stochastic matrix per head.
  std::vector<Var<T>> weights;
};

template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore<T>& store, const std::string& name, std::size_t d_model, std::size_t n_heads,
                     const Rng& init);

  std::size_t d_model() const noexcept { return d_model_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  std::size_t head_dim() const noexcept { return d_model_ / n_heads_; }

  /// Scaled dot-product attention with 1/sqrt(head_dim) scaling, unmasked.
  AttentionOutput<T> attend(Graph<T>& g, const Var<T>& queries, const Var<T>& keys, const Var<T>& values) const;

  const Linear<T>& q_proj() const { return q_; }
  const Linear<T>& k_proj() const { return k_; }
  const Linear<T>& v_proj() const { return v_; }
  const Linear<T>& o_proj() const { return o_; }

 private:
  std::size_t d_model_ = 0;
  std::size_t n_heads_ = 1;
  Linear<T> q_, k_, v_, o_;
};

struct LayerConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 64;
  double dropout = 0.0;
  bool pre_norm = false;
};

/// Two-layer ReLU feed-forward block.
template <typename T>
struct FeedForward {
  Linear<T> up;
  Linear<T> down;

  static FeedForward create(ParameterStore<T>& store, const std::string& name, std::size_t d_model,
                            std::size_t ffn_dim, const Rng& init);
  Var<T> operator()(Graph<T>& g, const Var<T>& x) const;
};

template <typename T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParameterStore<T>& store, const std::string& name, const LayerConfig& config, const Rng& init);

  const LayerConfig& config() const noexcept { return config_; }
  Var<T> forward(Graph<T>& g, const Var<T>& x, const Mode& mode) const;
  /// Same as forward() but also returns the self-attention weights.
  AttentionOutput<T> forward_traced(Graph<T>& g, const Var<T>& x, const Mode& mode) const;

  const MultiHeadAttention<T>& attention() const { return attn_; }
  const FeedForward<T>& ffn() const { return ffn_; }
  const LayerNorm<T>& norm1() const { return norm1_; }
  const LayerNorm<T>& norm2() const { return norm2_; }

 private:
  LayerConfig config_;
  MultiHeadAttention<T> attn_;
  FeedForward<T> ffn_;
  LayerNorm<T> norm1_, norm2_;
};

template <typename T>
struct DecoderOutput {
  Var<T> output;
  std::vector<Var<T>> cross_weights;
};

/// Self-attention over the target stream (no causal mask), cross-attention
/// into memory, feed-forward.
template <typename T>
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParameterStore<T>& store, const std::string& name, const LayerConfig& config, const Rng& init);

  const LayerConfig& config() const noexcept { return config_; }
  /// Throws UsageError on detached (empty) memory.
  DecoderOutput<T> forward(Graph<T>& g, const Var<T>& targets, const Var<T>& memory, const Mode& mode) const;

  const MultiHeadAttention<T>& self_attention() const { return self_; }
  const MultiHeadAttention<T>& cross_attention() const { return cross_; }
  const FeedForward<T>& ffn() const { return ffn_; }
  const LayerNorm<T>& norm(std::size_t i) const { return norms_[i]; }

 private:
  LayerConfig config_;
  MultiHeadAttention<T> self_, cross_;
  FeedForward<T> ffn_;
  LayerNorm<T> norms_[3];
};

}  // namespace iact::nn
