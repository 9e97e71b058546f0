#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/parameters.hpp"
#include "iact/model/config.hpp"
#include "iact/nn/layers.hpp"
#include "iact/nn/positional.hpp"

namespace iact {

/// Input segments [arm1 joints, arm2 joints, visual?], each with its CLS slots
/// in the first cls_counts[i] rows.
template <typename T>
struct SegmentSet {
  std::vector<Var<T>> segments;
  std::vector<std::size_t> cls_counts;

  std::size_t size() const { return segments.size(); }
  std::size_t length(std::size_t i) const { return segments[i].rows(); }
  std::size_t payload_length(std::size_t i) const { return length(i) - cls_counts[i]; }
};

/// The six encoder outputs. A part is absent when the segment has no CLS slots
/// or when the visual segment is disabled.
template <typename T>
struct EncodedState {
  std::array<std::optional<Var<T>>, 3> cls;
  std::array<std::optional<Var<T>>, 3> payload;

  bool has_visual() const { return payload[kVisual].has_value(); }
  std::size_t cls_length(std::size_t seg) const { return cls[seg] ? cls[seg]->rows() : 0; }
  std::size_t payload_length(std::size_t seg) const { return payload[seg] ? payload[seg]->rows() : 0; }
};

/// Segment-wise and cross-segment encoders over CLS-prefixed segments.
/// Segment-wise layers are shared by all segments within a block and distinct
/// across blocks; cross-segment layers see only the gathered CLS tokens.
template <typename T>
class HierEncoder {
 public:
  HierEncoder() = default;
  HierEncoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init);

  /// One token per joint scalar via a shared 1 -> d_model linear map.
  Var<T> embed_joints(Graph<T>& g, std::span<const T> qpos, std::size_t arm) const;
  /// Strided patch-convolution stem, flattened to tokens, plus 2-D positions.
  /// `image` is height x width x channels.
  Var<T> embed_visual(Graph<T>& g, const Tensor<T>& image) const;
  /// Prepends CLS bank rows and adds within-segment sinusoidal positions.
  SegmentSet<T> assemble(Graph<T>& g, const Var<T>& arm1, const Var<T>& arm2,
                         const std::optional<Var<T>>& visual) const;

  SegmentSet<T> segment_wise_pass(Graph<T>& g, const SegmentSet<T>& s, const nn::EncoderLayer<T>& layer,
                                  const nn::Mode& mode) const;
  /// Gathers CLS rows in segment order, adds role embeddings, runs `layer`,
  /// scatters results back. Identity when there are no CLS slots.
  SegmentSet<T> cross_segment_pass(Graph<T>& g, const SegmentSet<T>& s, const nn::EncoderLayer<T>& layer,
                                   const nn::Mode& mode) const;

  /// Full stack per the configured stacking mode, split into the six parts.
  EncodedState<T> encode(Graph<T>& g, const SegmentSet<T>& s, const nn::Mode& mode) const;
  /// Passes executed by encode(), as ('s' | 'c') codes in order.
  std::vector<char> schedule() const;

  const std::vector<nn::EncoderLayer<T>>& segment_layers() const { return seg_layers_; }
  const std::vector<nn::EncoderLayer<T>>& cross_layers() const { return cross_layers_; }
  Parameter<T>* cls_bank(std::size_t segment) const { return cls_bank_[segment]; }
  const nn::PositionalEncoding<T>& role_embedding() const { return role_pe_; }

 private:
  ModelConfig config_;
  nn::Linear<T> joint_embed_;
  std::vector<nn::Linear<T>> stem_;
  std::array<Parameter<T>*, 3> cls_bank_{nullptr, nullptr, nullptr};
  nn::PositionalEncoding<T> role_pe_;
  nn::PositionalEncoding<T> segment_pe_;
  Tensor<T> visual_pe_;
  std::vector<nn::EncoderLayer<T>> seg_layers_;
  std::vector<nn::EncoderLayer<T>> cross_layers_;
};

extern template class HierEncoder<float>;
extern template class HierEncoder<double>;

}  // namespace iact
