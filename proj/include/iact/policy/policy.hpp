#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "iact/io/stats.hpp"
#include "iact/model/decoder.hpp"
#include "iact/policy/model.hpp"

namespace iact {

/// Raw environment observation (unnormalized joints, image in [0, 1]).
struct Observation {
  std::vector<float> qpos;  // 2J, arm1 first
  Tensor<float> image;      // H x W x C; ignored when the visual segment is off
};

/// Cross-attention weights copied out of one forward pass.
struct AttentionRecord {
  /// weights[arm][layer][head], each k x memory_length.
  std::array<std::vector<std::vector<Tensor<float>>>, 2> weights;
  std::array<std::size_t, 2> cls_begin{0, 0};
  std::array<std::size_t, 2> cls_end{0, 0};
};

struct TracedPrediction {
  Tensor<float> chunk;
  AttentionRecord attention;
  /// Empty when the decoder memory carries no other-arm CLS rows.
  std::optional<AttnTrace> trace;
};

/// Eval-mode wrapper: normalize, run the network with z = 0, denormalize.
class Policy {
 public:
  Policy(InterActModel<float> model, std::optional<io::NormStats> stats);

  const ModelConfig& config() const noexcept { return model_.config(); }
  const InterActModel<float>& model() const noexcept { return model_; }
  InterActModel<float>& model() noexcept { return model_; }
  const std::optional<io::NormStats>& stats() const noexcept { return stats_; }

  /// k x 2J joint targets. Throws UsageError without normalization stats.
  Tensor<float> predict_chunk(const Observation& obs) const;
  TracedPrediction predict_traced(const Observation& obs) const;

 private:
  ModelInput<float> prepare(const Observation& obs) const;

  InterActModel<float> model_;
  std::optional<io::NormStats> stats_;
};

/// Chunks emitted at earlier timesteps; an entry emitted at t0 covers
/// [t0, t0 + k). Entries that can no longer contribute are dropped on push.
class ChunkBuffer {
 public:
  struct Entry {
    std::size_t emitted = 0;
    Tensor<double> chunk;  // k x dim
  };

  ChunkBuffer(std::size_t chunk_size, std::size_t dim) : k_(chunk_size), dim_(dim) {}

  /// Throws UsageError for out-of-order timesteps, DimensionError on shape.
  void push(std::size_t t, Tensor<double> chunk);
  void clear() { entries_.clear(); }

  std::size_t chunk_size() const noexcept { return k_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::deque<Entry>& entries() const noexcept { return entries_; }
  /// Number of stored chunks covering timestep t.
  std::size_t contributors(std::size_t t) const;

 private:
  std::size_t k_, dim_;
  std::deque<Entry> entries_;
};

/// sum_i w_i a_i / sum_i w_i with w_i = exp(-m * i), where i ranks the
/// contributing chunks by recency (0 = most recently emitted). Throws
/// UsageError when nothing covers t.
std::vector<double> temporal_ensemble(const ChunkBuffer& buf, std::size_t t, double m);

}  // namespace iact
