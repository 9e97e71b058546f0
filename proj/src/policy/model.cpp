#include "iact/policy/model.hpp"

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"

namespace iact {

template <typename T>
StyleEncoder<T>::StyleEncoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init)
    : config_(config) {
  const std::size_t d = config.d_model, a = config.action_dim();
  Rng r = init.substream("style.cls");
  Tensor<T> cls({1, d});
  for (auto& v : cls.storage()) v = static_cast<T>(r.normal());
  cls_ = &store.add("style.cls", std::move(cls));
  qpos_proj_ = nn::Linear<T>::create(store, "style.qpos", a, d, init);
  action_proj_ = nn::Linear<T>::create(store, "style.action", a, d, init);
  out_ = nn::Linear<T>::create(store, "style.out", d, 2 * config.latent_dim, init);
  pe_ = nn::PositionalEncoding<T>::sinusoidal(config.chunk_size + 2, d);
  for (std::size_t l = 0; l < config.style_layers; ++l) {
    layers_.emplace_back(store, "style.layer" + std::to_string(l), config.layer_config(), init);
  }
}

template <typename T>
typename StyleEncoder<T>::Posterior StyleEncoder<T>::posterior(Graph<T>& g, const Var<T>& qpos,
                                                               const Var<T>& actions, const nn::Mode& mode) const {
  if (!mode.train) throw UsageError("posterior is only available in train mode (inference uses z = 0)");
  const std::size_t a = config_.action_dim();
  if (qpos.rows() != 1 || qpos.cols() != a || actions.cols() != a) {
    throw DimensionError("posterior: qpos " + shape_string(qpos.value().shape()) + ", actions " +
                         shape_string(actions.value().shape()) + ", expected width " + std::to_string(a));
  }
  const Var<T> parts[3] = {g.parameter(*cls_), qpos_proj_(g, qpos), action_proj_(g, actions)};
  Var<T> x = ops::concat_rows<T>(parts);
  x = ops::add(x, pe_.rows(g, x.rows()));
  for (const auto& layer : layers_) x = layer.forward(g, x, mode);
  const Var<T> stats = out_(g, ops::slice_rows(x, 0, 1));
  const std::size_t z = config_.latent_dim;
  const T bound = static_cast<T>(kLogvarBound);
  return {ops::slice_cols(stats, 0, z), ops::clamp(ops::slice_cols(stats, z, 2 * z), -bound, bound)};
}

template <typename T>
InterActModel<T>::InterActModel(const ModelConfig& config) : config_(config) {
  config.validate();
  const Rng init = Rng(config.seed).substream("init");
  encoder_ = HierEncoder<T>(store_, config, init);
  decoder_ = MultiArmDecoder<T>(store_, config, init);
  if (config.use_latent) {
    style_ = StyleEncoder<T>(store_, config, init);
    latent_proj_ = nn::Linear<T>::create(store_, "latent.proj", config.latent_dim, config.d_model, init);
  }
}

template <typename T>
EncodedState<T> InterActModel<T>::encode(Graph<T>& g, const ModelInput<T>& in, const nn::Mode& mode) const {
  const std::size_t j = config_.joints_per_arm;
  if (in.qpos.size() != 2 * j) {
    throw DimensionError("model input: qpos width " + std::to_string(in.qpos.size()) + ", expected " +
                         std::to_string(2 * j));
  }
  const std::span<const T> q(in.qpos);
  const Var<T> arm1 = encoder_.embed_joints(g, q.subspan(0, j), kArm1);
  const Var<T> arm2 = encoder_.embed_joints(g, q.subspan(j, j), kArm2);
  std::optional<Var<T>> visual;
  if (config_.use_visual) {
    if (!in.image) throw UsageError("model input: image required when the visual segment is enabled");
    visual = encoder_.embed_visual(g, *in.image);
  }
  return encoder_.encode(g, encoder_.assemble(g, arm1, arm2, visual), mode);
}

template <typename T>
ModelOutput<T> InterActModel<T>::forward(Graph<T>& g, const ModelInput<T>& in, const Tensor<T>* target,
                                         const nn::Mode& mode, Rng* latent_rng) const {
  ModelOutput<T> out;
  const EncodedState<T> enc = encode(g, in, mode);
  std::optional<Var<T>> latent_token;
  if (config_.use_latent) {
    const std::size_t zd = config_.latent_dim;
    Var<T> z;
    if (mode.train && target != nullptr) {
      const Var<T> q = g.constant(Tensor<T>({1, in.qpos.size()}, in.qpos));
      auto post = style_.posterior(g, q, g.constant(*target), mode);
      out.mu = post.mu;
      out.logvar = post.logvar;
      if (latent_rng != nullptr) {
        Tensor<T> eps({1, zd});
        for (auto& v : eps.storage()) v = static_cast<T>(latent_rng->normal());
        const Var<T> sd = ops::exp(ops::scale(post.logvar, T(0.5)));
        z = ops::add(post.mu, ops::mul(sd, g.constant(std::move(eps))));
      } else {
        z = post.mu;
      }
    } else {
      z = g.constant(Tensor<T>({1, zd}));
    }
    latent_token = latent_proj_(g, z);
  }
  out.decode = decoder_.decode(g, enc, latent_token, mode);
  return out;
}

template <typename T>
Var<T> kl_to_standard_normal(const Var<T>& mu, const Var<T>& logvar) {
  Var<T> t = ops::add(ops::exp(logvar), ops::square(mu));
  t = ops::sub(ops::add_scalar(t, T(-1)), logvar);
  return ops::scale(ops::sum(t), T(0.5));
}

template <typename T>
Var<T> masked_l1(const Var<T>& pred, const Tensor<T>& target, std::span<const std::uint8_t> row_mask) {
  if (pred.value().shape() != target.shape()) {
    throw DimensionError("l1: prediction " + shape_string(pred.value().shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  Graph<T>& g = *pred.graph();
  Var<T> err = ops::abs(ops::sub(pred, g.constant(target)));
  std::size_t valid = target.rows();
  if (!row_mask.empty()) {
    if (row_mask.size() != target.rows()) {
      throw DimensionError("l1: mask length " + std::to_string(row_mask.size()) + " vs " +
                           std::to_string(target.rows()) + " rows");
    }
    Tensor<T> m(target.shape());
    valid = 0;
    for (std::size_t r = 0; r < target.rows(); ++r) {
      if (row_mask[r] == 0) continue;
      ++valid;
      for (std::size_t c = 0; c < target.cols(); ++c) m(r, c) = T(1);
    }
    if (valid == 0) throw UsageError("l1: mask excludes every row");
    err = ops::mul(err, g.constant(std::move(m)));
  }
  return ops::scale(ops::sum(err), static_cast<T>(1.0 / static_cast<double>(valid * target.cols())));
}

template <typename T>
LossTerms<T> chunk_loss(Graph<T>& g, const Var<T>& pred, const Tensor<T>& target, const std::optional<Var<T>>& mu,
                        const std::optional<Var<T>>& logvar, double beta, std::span<const std::uint8_t> row_mask) {
  LossTerms<T> t;
  t.l1 = masked_l1(pred, target, row_mask);
  if (mu && logvar) {
    t.kl = kl_to_standard_normal(*mu, *logvar);
    t.total = ops::add(t.l1, ops::scale(t.kl, static_cast<T>(beta)));
  } else {
    t.kl = g.constant(Tensor<T>({1, 1}));
    t.total = t.l1;
  }
  return t;
}

#define IACT_INSTANTIATE(T)                                                                                     \
  template class StyleEncoder<T>;                                                                               \
  template class InterActModel<T>;                                                                              \
  template Var<T> kl_to_standard_normal(const Var<T>&, const Var<T>&);                                          \
  template Var<T> masked_l1(const Var<T>&, const Tensor<T>&, std::span<const std::uint8_t>);                    \
  template LossTerms<T> chunk_loss(Graph<T>&, const Var<T>&, const Tensor<T>&, const std::optional<Var<T>>&, \
                                   const std::optional<Var<T>>&, double, std::span<const std::uint8_t>);
IACT_INSTANTIATE(float)
IACT_INSTANTIATE(double)
#undef IACT_INSTANTIATE

}  // namespace iact
