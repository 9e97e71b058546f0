#include "iact/model/config.hpp"

#include "iact/core/error.hpp"

namespace iact {

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.profile = "paper";
  c.d_model = 512;
  c.n_heads = 8;
  c.ffn_dim = 3200;
  c.dropout = 0.1;
  c.seg_layers = 3;
  c.cross_layers = 3;
  c.dec_layers = 4;
  c.sync_layers = 1;
  c.sync_position = 2;
  c.cls_counts = {7, 7, 5};
  c.joints_per_arm = 7;
  c.chunk_size = 50;
  c.latent_dim = 32;
  c.style_layers = 4;
  c.stem_channels = 128;
  c.lr = 1e-5;
  c.beta = 10.0;
  c.batch_size = 8;
  return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::named(const std::string& profile) {
  if (profile == "paper") return paper();
  if (profile == "desk") return desk();
  throw ConfigError("unknown profile '" + profile + "' (expected paper or desk)");
}

std::size_t ModelConfig::visual_tokens() const {
  if (!use_visual) return 0;
  const std::size_t f = std::size_t{1} << stem_blocks;
  return (image_height / f) * (image_width / f);
}

std::size_t ModelConfig::total_cls() const {
  return cls_counts[kArm1] + cls_counts[kArm2] + (use_visual ? cls_counts[kVisual] : 0);
}

nn::LayerConfig ModelConfig::layer_config() const {
  return nn::LayerConfig{d_model, n_heads, ffn_dim, dropout, pre_norm};
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (d_model == 0 || n_heads == 0) fail("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (d_model % 4 != 0) fail("d_model must be a multiple of 4 (2-D positional encoding)");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (dec_layers == 0) fail("dec_layers must be positive");
  if (sync_position < 1 || sync_position >= dec_layers) fail("sync_position must satisfy 1 <= s < dec_layers");
  if (!ablation.no_sync && sync_layers == 0) fail("sync_layers must be positive unless no_sync");
  if (joints_per_arm == 0) fail("joints_per_arm must be positive");
  if (chunk_size == 0) fail("chunk_size must be positive");
  if (use_visual) {
    if (image_height == 0 || image_width == 0 || image_channels == 0) fail("image dimensions must be positive");
    if (stem_blocks == 0) fail("stem_blocks must be positive");
    const std::size_t f = std::size_t{1} << stem_blocks;
    if (image_height % f || image_width % f) fail("image size must be divisible by 2^stem_blocks");
    if (stem_channels == 0) fail("stem_channels must be positive");
  }
  if (use_latent && latent_dim == 0) fail("latent_dim must be positive");
  if (lr <= 0.0) fail("lr must be positive");
  if (beta < 0.0) fail("beta must be non-negative");
  if (batch_size == 0) fail("batch_size must be positive");
  if (ensemble_decay < 0.0) fail("ensemble_decay must be non-negative");
}

}  // namespace iact
