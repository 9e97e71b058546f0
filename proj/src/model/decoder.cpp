#include "iact/model/decoder.hpp"

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"
#include "iact/nn/positional.hpp"

namespace iact {

template <typename T>
AttnTrace DecodeResult<T>::trace() const {
  AttnTrace tr;
  tr.layers = stacks[0].cross_weights.size();
  tr.heads = tr.layers > 0 ? stacks[0].cross_weights[0].size() : 0;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const ArmContext<T>& ctx = contexts[arm];
    if (ctx.cls_length() == 0) throw UsageError("attention trace needs other-arm CLS tokens in decoder memory");
    for (const auto& per_head : stacks[arm].cross_weights) {
      std::vector<double> row;
      double total = 0;
      for (const auto& w : per_head) {
        const Tensor<T>& a = w.value();
        double m = 0;
        for (std::size_t q = 0; q < a.rows(); ++q) {
          for (std::size_t j = ctx.cls_begin; j < ctx.cls_end; ++j) m += a(q, j);
        }
        m /= static_cast<double>(a.rows());
        row.push_back(m);
        total += m;
      }
      row.push_back(total / static_cast<double>(per_head.size()));
      tr.mass[arm].push_back(std::move(row));
    }
  }
  return tr;
}

template <typename T>
MultiArmDecoder<T>::MultiArmDecoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init)
    : config_(config) {
  const nn::LayerConfig lc = config.layer_config();
  const Tensor<T> pe = nn::sinusoidal_pe<T>(config.chunk_size, config.d_model);
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const std::string prefix = "dec.arm" + std::to_string(arm + 1);
    for (std::size_t l = 0; l < config.dec_layers; ++l) {
      layers_[arm].emplace_back(store, prefix + ".layer" + std::to_string(l), lc, init);
    }
    queries_[arm] = &store.add(prefix + ".queries", pe);
    heads_[arm] = nn::Linear<T>::create(store, prefix + ".head", config.d_model, config.joints_per_arm, init);
  }
  if (!config.ablation.no_sync) {
    for (std::size_t l = 0; l < config.sync_layers; ++l) {
      sync_.emplace_back(store, "dec.sync" + std::to_string(l), lc, init);
    }
  }
}

template <typename T>
ArmContext<T> MultiArmDecoder<T>::build_context(Graph<T>& g, std::size_t arm, const EncodedState<T>& enc,
                                                const std::optional<Var<T>>& latent_token) const {
  (void)g;
  if (arm > 1) throw UsageError("build_context: arm must be 0 or 1");
  if (!enc.payload[arm]) throw UsageError("build_context: encoded state lacks the arm payload");
  const std::size_t other = 1 - arm;
  const bool with_cls = !config_.ablation.no_cls;

  ArmContext<T> ctx;
  std::vector<Var<T>> parts;
  std::size_t rows = 0;
  auto push = [&](const std::optional<Var<T>>& v) {
    if (!v) return;
    parts.push_back(*v);
    rows += v->rows();
  };
  auto push_other_cls = [&] {
    ctx.cls_begin = rows;
    if (with_cls) push(enc.cls[other]);
    ctx.cls_end = rows;
  };

  if (arm == kArm1) {
    push(enc.payload[arm]);
    push_other_cls();
  } else {
    push_other_cls();
    push(enc.payload[arm]);
  }
  if (with_cls) push(enc.cls[kVisual]);
  push(enc.payload[kVisual]);
  push(latent_token);
  ctx.memory = parts.size() == 1 ? parts[0] : ops::concat_rows<T>(parts);
  return ctx;
}

template <typename T>
Var<T> MultiArmDecoder<T>::queries(Graph<T>& g, std::size_t arm) const {
  return g.parameter(*queries_[arm]);
}

template <typename T>
StackOutput<T> MultiArmDecoder<T>::run(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx, Var<T> x,
                                       std::size_t begin, std::size_t end, const nn::Mode& mode) const {
  StackOutput<T> out;
  for (std::size_t l = begin; l < end; ++l) {
    nn::DecoderOutput<T> o = layers_[arm][l].forward(g, x, ctx.memory, mode);
    x = o.output;
    out.cross_weights.push_back(std::move(o.cross_weights));
  }
  out.hidden = x;
  return out;
}

template <typename T>
StackOutput<T> MultiArmDecoder<T>::decode_front(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx,
                                                const Var<T>& queries, const nn::Mode& mode) const {
  return run(g, arm, ctx, queries, 0, config_.sync_position, mode);
}

template <typename T>
std::pair<Var<T>, Var<T>> MultiArmDecoder<T>::sync_exchange(Graph<T>& g, const Var<T>& h1, const Var<T>& h2,
                                                            const nn::Mode& mode) const {
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols()) {
    throw DimensionError("sync_exchange: " + shape_string(h1.value().shape()) + " vs " +
                         shape_string(h2.value().shape()));
  }
  if (sync_.empty()) return {h1, h2};
  const Var<T> parts[2] = {h1, h2};
  Var<T> x = ops::concat_rows<T>(parts);
  for (const auto& layer : sync_) x = layer.forward(g, x, mode);
  const std::size_t k = h1.rows();
  return {ops::slice_rows(x, 0, k), ops::slice_rows(x, k, 2 * k)};
}

template <typename T>
StackOutput<T> MultiArmDecoder<T>::decode_back(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx,
                                               const Var<T>& shared, const nn::Mode& mode) const {
  return run(g, arm, ctx, shared, config_.sync_position, config_.dec_layers, mode);
}

template <typename T>
Var<T> MultiArmDecoder<T>::action_head(Graph<T>& g, const Var<T>& hidden, std::size_t arm) const {
  return heads_[arm](g, hidden);
}

template <typename T>
DecodeResult<T> MultiArmDecoder<T>::decode(Graph<T>& g, const EncodedState<T>& enc,
                                           const std::optional<Var<T>>& latent_token, const nn::Mode& mode) const {
  DecodeResult<T> r;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    r.contexts[arm] = build_context(g, arm, enc, latent_token);
    r.stacks[arm] = decode_front(g, arm, r.contexts[arm], queries(g, arm), mode);
  }
  auto [s1, s2] = sync_exchange(g, r.stacks[0].hidden, r.stacks[1].hidden, mode);
  const Var<T> shared[2] = {s1, s2};
  Var<T> actions[2];
  for (std::size_t arm = 0; arm < 2; ++arm) {
    StackOutput<T> back = decode_back(g, arm, r.contexts[arm], shared[arm], mode);
    for (auto& w : back.cross_weights) r.stacks[arm].cross_weights.push_back(std::move(w));
    r.stacks[arm].hidden = back.hidden;
    actions[arm] = action_head(g, back.hidden, arm);
  }
  r.chunk = ops::concat_cols<T>(actions);
  return r;
}

template struct DecodeResult<float>;
template struct DecodeResult<double>;
template class MultiArmDecoder<float>;
template class MultiArmDecoder<double>;

}  // namespace iact
