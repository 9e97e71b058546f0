#include "iact/nn/layers.hpp"

#include <cmath>

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"

namespace iact::nn {

template <typename T>
Var<T> apply_dropout(const Var<T>& x, double p, const Mode& mode) {
  if (!mode.train || p <= 0.0) return x;
  if (mode.dropout_rng == nullptr) throw UsageError("train-mode dropout needs a dropout substream");
  return ops::dropout(x, p, *mode.dropout_rng);
}

template <typename T>
Linear<T> Linear<T>::create(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                            const Rng& init) {
  Rng r = init.substream(name + ".w");
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor<T> w({in, out});
  for (auto& v : w.storage()) v = static_cast<T>(r.uniform(-bound, bound));
  Linear layer;
  layer.weight = &store.add(name + ".w", std::move(w));
  layer.bias = &store.add(name + ".b", Tensor<T>({1, out}));
  return layer;
}

template <typename T>
Var<T> Linear<T>::operator()(Graph<T>& g, const Var<T>& x) const {
  if (x.cols() != in_features()) {
    throw DimensionError("linear: input " + shape_string(x.value().shape()) + " vs weight " +
                         shape_string(weight->value.shape()));
  }
  return ops::add_row(ops::matmul(x, g.parameter(*weight)), g.parameter(*bias));
}

template <typename T>
LayerNorm<T> LayerNorm<T>::create(ParameterStore<T>& store, const std::string& name, std::size_t width) {
  LayerNorm ln;
  ln.gain = &store.add(name + ".gain", Tensor<T>({1, width}, T(1)));
  ln.bias = &store.add(name + ".bias", Tensor<T>({1, width}));
  return ln;
}

template <typename T>
Var<T> LayerNorm<T>::operator()(Graph<T>& g, const Var<T>& x) const {
  return ops::layer_norm(x, g.parameter(*gain), g.parameter(*bias), static_cast<T>(kEps));
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterStore<T>& store, const std::string& name, std::size_t d_model,
                                          std::size_t n_heads, const Rng& init)
    : d_model_(d_model), n_heads_(n_heads) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  q_ = Linear<T>::create(store, name + ".q", d_model, d_model, init);
  k_ = Linear<T>::create(store, name + ".k", d_model, d_model, init);
  v_ = Linear<T>::create(store, name + ".v", d_model, d_model, init);
  o_ = Linear<T>::create(store, name + ".o", d_model, d_model, init);
}

template <typename T>
AttentionOutput<T> MultiHeadAttention<T>::attend(Graph<T>& g, const Var<T>& queries, const Var<T>& keys,
                                                 const Var<T>& values) const {
  if (queries.cols() != d_model_ || keys.cols() != d_model_ || values.cols() != d_model_) {
    throw DimensionError("attend: widths " + shape_string(queries.value().shape()) + ", " +
                         shape_string(keys.value().shape()) + ", " + shape_string(values.value().shape()) +
                         " must all equal d_model " + std::to_string(d_model_));
  }
  if (keys.rows() != values.rows()) {
    throw DimensionError("attend: keys " + shape_string(keys.value().shape()) + " and values " +
                         shape_string(values.value().shape()) + " differ in length");
  }
  const Var<T> q = q_(g, queries);
  const Var<T> k = k_(g, keys);
  const Var<T> v = v_(g, values);
  const std::size_t hd = head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  AttentionOutput<T> out;
  std::vector<Var<T>> heads;
  heads.reserve(n_heads_);
  for (std::size_t h = 0; h < n_heads_; ++h) {
    const Var<T> qh = n_heads_ == 1 ? q : ops::slice_cols(q, h * hd, (h + 1) * hd);
    const Var<T> kh = n_heads_ == 1 ? k : ops::slice_cols(k, h * hd, (h + 1) * hd);
    const Var<T> vh = n_heads_ == 1 ? v : ops::slice_cols(v, h * hd, (h + 1) * hd);
    const Var<T> weights = ops::softmax_rows(ops::scale(ops::matmul_nt(qh, kh), scale));
    heads.push_back(ops::matmul(weights, vh));
    out.weights.push_back(weights);
  }
  const Var<T> merged = n_heads_ == 1 ? heads.front() : ops::concat_cols<T>(heads);
  out.output = o_(g, merged);
  return out;
}

template <typename T>
FeedForward<T> FeedForward<T>::create(ParameterStore<T>& store, const std::string& name, std::size_t d_model,
                                      std::size_t ffn_dim, const Rng& init) {
  FeedForward f;
  f.up = Linear<T>::create(store, name + ".up", d_model, ffn_dim, init);
  f.down = Linear<T>::create(store, name + ".down", ffn_dim, d_model, init);
  return f;
}

template <typename T>
Var<T> FeedForward<T>::operator()(Graph<T>& g, const Var<T>& x) const {
  return down(g, ops::relu(up(g, x)));
}

template <typename T>
EncoderLayer<T>::EncoderLayer(ParameterStore<T>& store, const std::string& name, const LayerConfig& config,
                              const Rng& init)
    : config_(config),
      attn_(store, name + ".attn", config.d_model, config.n_heads, init),
      ffn_(FeedForward<T>::create(store, name + ".ffn", config.d_model, config.ffn_dim, init)),
      norm1_(LayerNorm<T>::create(store, name + ".norm1", config.d_model)),
      norm2_(LayerNorm<T>::create(store, name + ".norm2", config.d_model)) {}

template <typename T>
AttentionOutput<T> EncoderLayer<T>::forward_traced(Graph<T>& g, const Var<T>& x, const Mode& mode) const {
  if (x.cols() != config_.d_model) {
    throw DimensionError("encoder layer: input " + shape_string(x.value().shape()) + " vs d_model " +
                         std::to_string(config_.d_model));
  }
  const double p = config_.dropout;
  AttentionOutput<T> out;
  if (config_.pre_norm) {
    const Var<T> h = norm1_(g, x);
    AttentionOutput<T> a = attn_.attend(g, h, h, h);
    const Var<T> x1 = ops::add(x, apply_dropout(a.output, p, mode));
    const Var<T> f = ffn_(g, norm2_(g, x1));
    out.output = ops::add(x1, apply_dropout(f, p, mode));
    out.weights = std::move(a.weights);
  } else {
    AttentionOutput<T> a = attn_.attend(g, x, x, x);
    const Var<T> x1 = norm1_(g, ops::add(x, apply_dropout(a.output, p, mode)));
    const Var<T> f = ffn_(g, x1);
    out.output = norm2_(g, ops::add(x1, apply_dropout(f, p, mode)));
    out.weights = std::move(a.weights);
  }
  return out;
}

template <typename T>
Var<T> EncoderLayer<T>::forward(Graph<T>& g, const Var<T>& x, const Mode& mode) const {
  return forward_traced(g, x, mode).output;
}

template <typename T>
DecoderLayer<T>::DecoderLayer(ParameterStore<T>& store, const std::string& name, const LayerConfig& config,
                              const Rng& init)
    : config_(config),
      self_(store, name + ".self", config.d_model, config.n_heads, init),
      cross_(store, name + ".cross", config.d_model, config.n_heads, init),
      ffn_(FeedForward<T>::create(store, name + ".ffn", config.d_model, config.ffn_dim, init)),
      norms_{LayerNorm<T>::create(store, name + ".norm1", config.d_model),
             LayerNorm<T>::create(store, name + ".norm2", config.d_model),
             LayerNorm<T>::create(store, name + ".norm3", config.d_model)} {}

template <typename T>
DecoderOutput<T> DecoderLayer<T>::forward(Graph<T>& g, const Var<T>& targets, const Var<T>& memory,
                                          const Mode& mode) const {
  if (!memory.attached()) throw UsageError("decoder layer: memory is empty");
  if (targets.cols() != config_.d_model || memory.cols() != config_.d_model) {
    throw DimensionError("decoder layer: targets " + shape_string(targets.value().shape()) + " / memory " +
                         shape_string(memory.value().shape()) + " vs d_model " + std::to_string(config_.d_model));
  }
  const double p = config_.dropout;
  DecoderOutput<T> out;
  if (config_.pre_norm) {
    Var<T> h = norms_[0](g, targets);
    const Var<T> x1 = ops::add(targets, apply_dropout(self_.attend(g, h, h, h).output, p, mode));
    h = norms_[1](g, x1);
    AttentionOutput<T> c = cross_.attend(g, h, memory, memory);
    const Var<T> x2 = ops::add(x1, apply_dropout(c.output, p, mode));
    out.output = ops::add(x2, apply_dropout(ffn_(g, norms_[2](g, x2)), p, mode));
    out.cross_weights = std::move(c.weights);
  } else {
    const Var<T> x1 = norms_[0](g, ops::add(targets, apply_dropout(self_.attend(g, targets, targets, targets).output, p, mode)));
    AttentionOutput<T> c = cross_.attend(g, x1, memory, memory);
    const Var<T> x2 = norms_[1](g, ops::add(x1, apply_dropout(c.output, p, mode)));
    out.output = norms_[2](g, ops::add(x2, apply_dropout(ffn_(g, x2), p, mode)));
    out.cross_weights = std::move(c.weights);
  }
  return out;
}

template Var<float> apply_dropout(const Var<float>&, double, const Mode&);
template Var<double> apply_dropout(const Var<double>&, double, const Mode&);
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template struct FeedForward<float>;
template struct FeedForward<double>;
template class EncoderLayer<float>;
template class EncoderLayer<double>;
template class DecoderLayer<float>;
template class DecoderLayer<double>;

}  // namespace iact::nn
