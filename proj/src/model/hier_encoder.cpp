#include "iact/model/hier_encoder.hpp"

#include <algorithm>

#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"

namespace iact {
namespace {

const char* segment_name(std::size_t s) {
  switch (s) {
    case kArm1: return "arm1";
    case kArm2: return "arm2";
    default: return "visual";
  }
}

}  // namespace

template <typename T>
HierEncoder<T>::HierEncoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init)
    : config_(config) {
  const std::size_t d = config.d_model;
  joint_embed_ = nn::Linear<T>::create(store, "enc.joint_embed", 1, d, init);

  if (config.use_visual) {
    std::size_t in = config.image_channels;
    for (std::size_t b = 0; b < config.stem_blocks; ++b) {
      const std::size_t out = b + 1 == config.stem_blocks ? d : config.stem_channels;
      stem_.push_back(nn::Linear<T>::create(store, "enc.stem" + std::to_string(b), 4 * in, out, init));
      in = out;
    }
    const std::size_t f = std::size_t{1} << config.stem_blocks;
    visual_pe_ = nn::sinusoidal_pe_2d<T>(config.image_height / f, config.image_width / f, d);
  }

  const std::size_t n_segments = config.use_visual ? 3 : 2;
  std::size_t longest = config.joints_per_arm;
  for (std::size_t s = 0; s < n_segments; ++s) {
    const std::size_t c = config.cls_counts[s];
    if (c > 0) {
      Rng r = init.substream(std::string("enc.cls.") + segment_name(s));
      Tensor<T> bank({c, d});
      for (auto& v : bank.storage()) v = static_cast<T>(r.normal());
      cls_bank_[s] = &store.add(std::string("enc.cls.") + segment_name(s), std::move(bank));
    }
    const std::size_t payload = s == kVisual ? config.visual_tokens() : config.joints_per_arm;
    longest = std::max(longest, c + payload);
  }
  segment_pe_ = nn::PositionalEncoding<T>::sinusoidal(longest, d);

  const nn::LayerConfig lc = config.layer_config();
  for (std::size_t l = 0; l < config.seg_layers; ++l) {
    seg_layers_.emplace_back(store, "enc.seg" + std::to_string(l), lc, init);
  }
  if (!config.ablation.no_cross && config.total_cls() > 0) {
    role_pe_ = nn::PositionalEncoding<T>::learned(store, "enc.role_pe", config.total_cls(), d, init);
    for (std::size_t l = 0; l < config.cross_layers; ++l) {
      cross_layers_.emplace_back(store, "enc.cross" + std::to_string(l), lc, init);
    }
  }
}

template <typename T>
Var<T> HierEncoder<T>::embed_joints(Graph<T>& g, std::span<const T> qpos, std::size_t arm) const {
  if (arm != kArm1 && arm != kArm2) throw UsageError("embed_joints: arm must be 0 or 1");
  if (qpos.size() != config_.joints_per_arm) {
    throw DimensionError("embed_joints: expected " + std::to_string(config_.joints_per_arm) + " joints, got " +
                         std::to_string(qpos.size()));
  }
  Var<T> column = g.constant(Tensor<T>({qpos.size(), 1}, std::vector<T>(qpos.begin(), qpos.end())));
  return joint_embed_(g, column);
}

template <typename T>
Var<T> HierEncoder<T>::embed_visual(Graph<T>& g, const Tensor<T>& image) const {
  if (!config_.use_visual) throw UsageError("embed_visual: visual segment is disabled");
  const Shape expected{config_.image_height, config_.image_width, config_.image_channels};
  if (image.shape() != expected) {
    throw DimensionError("embed_visual: image " + shape_string(image.shape()) + " vs configured " +
                         shape_string(expected));
  }
  std::size_t h = config_.image_height, w = config_.image_width;
  Var<T> x = g.constant(image.reshaped({h * w, config_.image_channels}));
  for (std::size_t b = 0; b < stem_.size(); ++b) {
    x = stem_[b](g, ops::patchify(x, h, w, 2));
    h /= 2;
    w /= 2;
    if (b + 1 < stem_.size()) x = ops::relu(x);
  }
  return ops::add(x, g.constant(visual_pe_));
}

template <typename T>
SegmentSet<T> HierEncoder<T>::assemble(Graph<T>& g, const Var<T>& arm1, const Var<T>& arm2,
                                       const std::optional<Var<T>>& visual) const {
  if (visual.has_value() != config_.use_visual) {
    throw UsageError(config_.use_visual ? "assemble: visual tokens required" : "assemble: visual segment is disabled");
  }
  SegmentSet<T> s;
  const Var<T>* payloads[3] = {&arm1, &arm2, visual ? &*visual : nullptr};
  for (std::size_t i = 0; i < (visual ? 3u : 2u); ++i) {
    const Var<T>& p = *payloads[i];
    if (p.cols() != config_.d_model) {
      throw DimensionError("assemble: segment width " + std::to_string(p.cols()) + " vs d_model " +
                           std::to_string(config_.d_model));
    }
    Var<T> seg = p;
    if (cls_bank_[i] != nullptr) {
      const Var<T> parts[2] = {g.parameter(*cls_bank_[i]), p};
      seg = ops::concat_rows<T>(parts);
    }
    seg = ops::add(seg, segment_pe_.rows(g, seg.rows()));
    s.segments.push_back(seg);
    s.cls_counts.push_back(config_.cls_counts[i]);
  }
  return s;
}

template <typename T>
SegmentSet<T> HierEncoder<T>::segment_wise_pass(Graph<T>& g, const SegmentSet<T>& s,
                                                const nn::EncoderLayer<T>& layer, const nn::Mode& mode) const {
  SegmentSet<T> out = s;
  for (auto& seg : out.segments) seg = layer.forward(g, seg, mode);
  return out;
}

template <typename T>
SegmentSet<T> HierEncoder<T>::cross_segment_pass(Graph<T>& g, const SegmentSet<T>& s,
                                                 const nn::EncoderLayer<T>& layer, const nn::Mode& mode) const {
  std::vector<Var<T>> gathered;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.cls_counts[i] > 0) gathered.push_back(ops::slice_rows(s.segments[i], 0, s.cls_counts[i]));
  }
  if (gathered.empty()) return s;
  Var<T> seq = ops::concat_rows<T>(gathered);
  seq = ops::add(seq, role_pe_.rows(g, seq.rows()));
  const Var<T> mixed = layer.forward(g, seq, mode);

  SegmentSet<T> out = s;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t c = s.cls_counts[i];
    if (c == 0) continue;
    const Var<T> parts[2] = {ops::slice_rows(mixed, offset, offset + c),
                             ops::slice_rows(s.segments[i], c, s.length(i))};
    out.segments[i] = ops::concat_rows<T>(parts);
    offset += c;
  }
  return out;
}

template <typename T>
std::vector<char> HierEncoder<T>::schedule() const {
  std::vector<char> plan;
  const std::size_t ns = seg_layers_.size(), nc = cross_layers_.size();
  if (config_.stacking == Stacking::kInterleaved) {
    for (std::size_t l = 0; l < std::max(ns, nc); ++l) {
      if (l < ns) plan.push_back('s');
      if (l < nc) plan.push_back('c');
    }
  } else {
    plan.insert(plan.end(), ns, 's');
    plan.insert(plan.end(), nc, 'c');
  }
  return plan;
}

template <typename T>
EncodedState<T> HierEncoder<T>::encode(Graph<T>& g, const SegmentSet<T>& s, const nn::Mode& mode) const {
  SegmentSet<T> cur = s;
  std::size_t si = 0, ci = 0;
  for (char pass : schedule()) {
    if (pass == 's') {
      cur = segment_wise_pass(g, cur, seg_layers_[si++], mode);
    } else {
      cur = cross_segment_pass(g, cur, cross_layers_[ci++], mode);
    }
  }
  EncodedState<T> enc;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const std::size_t c = cur.cls_counts[i];
    if (c > 0) enc.cls[i] = ops::slice_rows(cur.segments[i], 0, c);
    enc.payload[i] = c > 0 ? ops::slice_rows(cur.segments[i], c, cur.length(i)) : cur.segments[i];
  }
  return enc;
}

template class HierEncoder<float>;
template class HierEncoder<double>;

}  // namespace iact
