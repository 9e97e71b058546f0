#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/parameters.hpp"
#include "iact/model/config.hpp"
#include "iact/model/hier_encoder.hpp"
#include "iact/nn/layers.hpp"

namespace iact {

/// Decoder memory for one arm. `cls_begin`/`cls_end` address the other-arm
/// CLS rows; the span is empty when those rows are not part of the memory.
template <typename T>
struct ArmContext {
  Var<T> memory;
  std::size_t cls_begin = 0;
  std::size_t cls_end = 0;

  std::size_t cls_length() const { return cls_end - cls_begin; }
};

template <typename T>
struct StackOutput {
  Var<T> hidden;
  /// cross_weights[layer][head], each k x memory_length.
  std::vector<std::vector<Var<T>>> cross_weights;
};

/// Attention mass on the other-arm CLS span, averaged over the k queries.
/// mass[arm][layer][head]; head index n_heads holds the head average.
struct AttnTrace {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::array<std::vector<std::vector<double>>, 2> mass;

  double at(std::size_t arm, std::size_t layer, std::size_t head) const { return mass[arm][layer][head]; }
  double head_average(std::size_t arm, std::size_t layer) const { return mass[arm][layer][heads]; }
};

template <typename T>
struct DecodeResult {
  /// k x 2J, arm1 columns first.
  Var<T> chunk;
  std::array<ArmContext<T>, 2> contexts;
  std::array<StackOutput<T>, 2> stacks;

  /// Throws UsageError when the memories carry no other-arm CLS rows.
  AttnTrace trace() const;
};

/// Two arm-specific decoder stacks split at the sync position, a shared
/// self-attention block between the halves, and per-arm linear action heads.
template <typename T>
class MultiArmDecoder {
 public:
  MultiArmDecoder() = default;
  MultiArmDecoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init);

  /// Memory order: arm1 [S_arm1, CLS_arm2, CLS_visual, S_visual],
  /// arm2 [CLS_arm1, S_arm2, CLS_visual, S_visual], then the latent token if
  /// given. The no_cls ablation drops both CLS groups.
  ArmContext<T> build_context(Graph<T>& g, std::size_t arm, const EncodedState<T>& enc,
                              const std::optional<Var<T>>& latent_token) const;

  /// Learned target queries of one arm (k x d_model).
  Var<T> queries(Graph<T>& g, std::size_t arm) const;

  /// Decoder layers [0, sync_position).
  StackOutput<T> decode_front(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx, const Var<T>& queries,
                              const nn::Mode& mode) const;
  /// Joint self-attention over concat(h1, h2), split back at k.
  std::pair<Var<T>, Var<T>> sync_exchange(Graph<T>& g, const Var<T>& h1, const Var<T>& h2,
                                          const nn::Mode& mode) const;
  /// Decoder layers [sync_position, dec_layers).
  StackOutput<T> decode_back(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx, const Var<T>& shared,
                             const nn::Mode& mode) const;
  Var<T> action_head(Graph<T>& g, const Var<T>& hidden, std::size_t arm) const;

  DecodeResult<T> decode(Graph<T>& g, const EncodedState<T>& enc, const std::optional<Var<T>>& latent_token,
                         const nn::Mode& mode) const;

  const std::vector<nn::DecoderLayer<T>>& layers(std::size_t arm) const { return layers_[arm]; }
  const std::vector<nn::EncoderLayer<T>>& sync_layers() const { return sync_; }

 private:
  StackOutput<T> run(Graph<T>& g, std::size_t arm, const ArmContext<T>& ctx, Var<T> x, std::size_t begin,
                     std::size_t end, const nn::Mode& mode) const;

  ModelConfig config_;
  std::array<std::vector<nn::DecoderLayer<T>>, 2> layers_;
  std::array<Parameter<T>*, 2> queries_{nullptr, nullptr};
  std::vector<nn::EncoderLayer<T>> sync_;
  std::array<nn::Linear<T>, 2> heads_;
};

extern template class MultiArmDecoder<float>;
extern template class MultiArmDecoder<double>;

}  // namespace iact
