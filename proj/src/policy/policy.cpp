#include "iact/policy/policy.hpp"

#include <cmath>

#include "iact/core/error.hpp"

namespace iact {

Policy::Policy(InterActModel<float> model, std::optional<io::NormStats> stats)
    : model_(std::move(model)), stats_(std::move(stats)) {}

ModelInput<float> Policy::prepare(const Observation& obs) const {
  if (!stats_ || stats_->empty()) throw UsageError("policy has no normalization stats");
  if (obs.qpos.size() != config().action_dim()) {
    throw DimensionError("observation qpos width " + std::to_string(obs.qpos.size()) + ", model expects " +
                         std::to_string(config().action_dim()));
  }
  ModelInput<float> in;
  in.qpos = stats_->normalize_qpos(obs.qpos);
  if (config().use_visual) in.image = obs.image;
  return in;
}

Tensor<float> Policy::predict_chunk(const Observation& obs) const {
  Graph<float> g(GraphOptions{.record = false});
  const ModelOutput<float> out = model_.forward(g, prepare(obs), nullptr, nn::Mode{}, nullptr);
  const Tensor<float>& raw = out.chunk().value();
  return Tensor<float>(raw.shape(), stats_->denormalize_action(raw.values()));
}

TracedPrediction Policy::predict_traced(const Observation& obs) const {
  Graph<float> g(GraphOptions{.record = false});
  const ModelOutput<float> out = model_.forward(g, prepare(obs), nullptr, nn::Mode{}, nullptr);
  TracedPrediction p;
  const Tensor<float>& raw = out.chunk().value();
  p.chunk = Tensor<float>(raw.shape(), stats_->denormalize_action(raw.values()));
  for (std::size_t arm = 0; arm < 2; ++arm) {
    p.attention.cls_begin[arm] = out.decode.contexts[arm].cls_begin;
    p.attention.cls_end[arm] = out.decode.contexts[arm].cls_end;
    for (const auto& layer : out.decode.stacks[arm].cross_weights) {
      std::vector<Tensor<float>> heads;
      for (const auto& w : layer) heads.push_back(w.value());
      p.attention.weights[arm].push_back(std::move(heads));
    }
  }
  if (out.decode.contexts[0].cls_length() > 0) p.trace = out.decode.trace();
  return p;
}

void ChunkBuffer::push(std::size_t t, Tensor<double> chunk) {
  if (chunk.rank() != 2 || chunk.rows() != k_ || chunk.cols() != dim_) {
    throw DimensionError("chunk buffer: chunk " + shape_string(chunk.shape()) + ", expected [" + std::to_string(k_) +
                         ", " + std::to_string(dim_) + "]");
  }
  if (!entries_.empty() && t <= entries_.back().emitted) {
    throw UsageError("chunk buffer: timestep " + std::to_string(t) + " not after " +
                     std::to_string(entries_.back().emitted));
  }
  entries_.push_back({t, std::move(chunk)});
  while (entries_.front().emitted + k_ <= t) entries_.pop_front();
}

std::size_t ChunkBuffer::contributors(std::size_t t) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.emitted <= t && t < e.emitted + k_;
  return n;
}

std::vector<double> temporal_ensemble(const ChunkBuffer& buf, std::size_t t, double m) {
  std::vector<double> acc(buf.dim(), 0.0);
  double wsum = 0.0;
  std::size_t age = 0;
  for (auto it = buf.entries().rbegin(); it != buf.entries().rend(); ++it) {
    if (it->emitted > t || t >= it->emitted + buf.chunk_size()) continue;
    const double w = std::exp(-m * static_cast<double>(age++));
    const std::size_t row = t - it->emitted;
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * it->chunk(row, c);
    wsum += w;
  }
  if (age == 0) throw UsageError("temporal ensemble: no prediction covers timestep " + std::to_string(t));
  for (auto& v : acc) v /= wsum;
  return acc;
}

}  // namespace iact
