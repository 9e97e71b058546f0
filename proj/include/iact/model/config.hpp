#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "iact/nn/layers.hpp"

namespace iact {

enum class Stacking { kInterleaved, kSequential };
enum class Precision { kF32, kF64 };

/// Component removals used for ablation studies.
struct Ablation {
  /// Drop the other-arm and visual CLS tokens from decoder memory.
  bool no_cls = false;
  /// Skip every cross-segment encoder pass.
  bool no_cross = false;
  /// Replace the synchronization block with the identity.
  bool no_sync = false;

  bool operator==(const Ablation&) const = default;
};

/// Segment order inside the hierarchical encoder.
enum Segment : std::size_t { kArm1 = 0, kArm2 = 1, kVisual = 2 };

/// Every architectural and training hyperparameter. Two named profiles exist:
/// "paper" (the published setting) and "desk" (small enough for CPU tests).
struct ModelConfig {
  std::string profile = "desk";

  // Transformer widths.
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 64;
  double dropout = 0.1;
  bool pre_norm = false;

  // Depths.
  std::size_t seg_layers = 1;
  std::size_t cross_layers = 1;
  std::size_t dec_layers = 2;
  std::size_t sync_layers = 1;
  /// Decoder layers run before the synchronization block.
  std::size_t sync_position = 1;
  Stacking stacking = Stacking::kInterleaved;

  // Tokens.
  std::array<std::size_t, 3> cls_counts{2, 2, 2};
  std::size_t joints_per_arm = 4;
  std::size_t chunk_size = 8;
  bool use_visual = true;
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  std::size_t image_channels = 1;
  /// Each stem block halves the spatial resolution.
  std::size_t stem_blocks = 3;
  std::size_t stem_channels = 16;

  // Latent style variable.
  bool use_latent = true;
  std::size_t latent_dim = 8;
  std::size_t style_layers = 1;

  // Optimization.
  double lr = 1e-3;
  double beta = 10.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  std::size_t checkpoint_interval = 0;

  // Inference.
  double ensemble_decay = 0.01;

  Ablation ablation;
  Precision precision = Precision::kF32;
  std::uint64_t seed = 0;

  static ModelConfig paper();
  static ModelConfig desk();
  /// Throws ConfigError for an unknown name.
  static ModelConfig named(const std::string& profile);

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  std::size_t action_dim() const { return 2 * joints_per_arm; }
  std::size_t visual_tokens() const;
  std::size_t total_cls() const;
  nn::LayerConfig layer_config() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace iact
