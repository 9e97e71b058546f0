#include "iact/policy/trainer.hpp"

#include <algorithm>

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"

namespace iact {

template <typename T>
Trainer<T>::Trainer(InterActModel<T>& model, std::span<const io::DemoEpisode> episodes, const io::NormStats& stats)
    : model_(model),
      adam_(AdamOptions{model.config().lr, model.config().adam_beta1, model.config().adam_beta2,
                        model.config().adam_eps}),
      batch_rng_(Rng(model.config().seed).substream("batches")),
      dropout_rng_(Rng(model.config().seed).substream("dropout")),
      latent_rng_(Rng(model.config().seed).substream("latent")),
      start_(std::chrono::steady_clock::now()) {
  const ModelConfig& c = model.config();
  if (episodes.empty()) throw UsageError("training needs at least one episode");
  bool fits = false;
  for (const auto& ep : episodes) {
    ep.validate();
    if (ep.joints_per_arm != c.joints_per_arm) {
      throw DimensionError("episode has " + std::to_string(ep.joints_per_arm) + " joints per arm, model expects " +
                           std::to_string(c.joints_per_arm));
    }
    if (c.use_visual && (ep.height != c.image_height || ep.width != c.image_width || ep.channels != c.image_channels)) {
      throw DimensionError("episode frames " + std::to_string(ep.height) + "x" + std::to_string(ep.width) + "x" +
                           std::to_string(ep.channels) + " do not match the model's image size");
    }
    fits = fits || ep.steps >= c.chunk_size;
    Prepared p;
    p.steps = ep.steps;
    p.source = &ep;
    for (std::size_t t = 0; t < ep.steps; ++t) {
      for (float v : stats.normalize_qpos(ep.qpos_at(t))) p.qpos.push_back(static_cast<T>(v));
      for (float v : stats.normalize_action(ep.action_at(t))) p.action.push_back(static_cast<T>(v));
    }
    total_steps_ += ep.steps;
    data_.push_back(std::move(p));
  }
  if (!fits) {
    throw ConfigError("chunk size " + std::to_string(c.chunk_size) + " exceeds the length of every episode");
  }
}

template <typename T>
TrainSample<T> Trainer<T>::sample_at(std::size_t episode, std::size_t t) const {
  const Prepared& p = data_.at(episode);
  if (t >= p.steps) throw UsageError("sample_at: timestep out of range");
  const ModelConfig& c = model_.config();
  const std::size_t a = c.action_dim(), k = c.chunk_size;
  TrainSample<T> s;
  s.input.qpos.assign(p.qpos.begin() + t * a, p.qpos.begin() + (t + 1) * a);
  if (c.use_visual) {
    const auto frame = p.source->frame_at(t);
    s.input.image = Tensor<T>({c.image_height, c.image_width, c.image_channels},
                              std::vector<T>(frame.begin(), frame.end()));
  }
  s.target = Tensor<T>({k, a});
  s.mask.assign(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t src = std::min(t + i, p.steps - 1);
    s.mask[i] = t + i < p.steps;
    std::copy_n(p.action.begin() + src * a, a, s.target.data() + i * a);
  }
  return s;
}

template <typename T>
StepMetrics Trainer<T>::run_batch(std::span<const TrainSample<T>> batch, bool train_mode, bool update) {
  const ModelConfig& c = model_.config();
  Graph<T> g(GraphOptions{.record = update});
  nn::Mode mode{train_mode, &dropout_rng_};
  std::vector<Var<T>> totals;
  double l1 = 0, kl = 0;
  for (const auto& s : batch) {
    const ModelOutput<T> out = model_.forward(g, s.input, &s.target, mode, train_mode ? &latent_rng_ : nullptr);
    const LossTerms<T> terms = chunk_loss(g, out.chunk(), s.target, out.mu, out.logvar, c.beta, s.mask);
    l1 += terms.l1.value()[0];
    kl += terms.kl.value()[0];
    totals.push_back(terms.total);
  }
  const Var<T> total =
      ops::scale(ops::sum(ops::concat_rows<T>(totals)), static_cast<T>(1.0 / static_cast<double>(batch.size())));
  if (update) {
    g.backward(total);
    adam_.step(model_.params());
  }
  StepMetrics m;
  const double n = static_cast<double>(batch.size());
  m.l1 = l1 / n;
  m.kl = kl / n;
  m.total = total.value()[0];
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  return m;
}

template <typename T>
StepMetrics Trainer<T>::evaluate_batch(std::span<const TrainSample<T>> batch, bool train_mode) {
  StepMetrics m = run_batch(batch, train_mode, false);
  m.step = steps_;
  return m;
}

template <typename T>
StepMetrics Trainer<T>::step() {
  std::vector<TrainSample<T>> batch;
  for (std::size_t b = 0; b < model_.config().batch_size; ++b) {
    std::size_t idx = batch_rng_.below(total_steps_);
    std::size_t ep = 0;
    while (idx >= data_[ep].steps) idx -= data_[ep++].steps;
    batch.push_back(sample_at(ep, idx));
  }
  StepMetrics m = run_batch(batch, true, true);
  m.step = ++steps_;
  return m;
}

template class Trainer<float>;
template class Trainer<double>;

}  // namespace iact
