#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "iact/core/graph.hpp"
#include "iact/core/parameters.hpp"
#include "iact/model/config.hpp"
#include "iact/model/decoder.hpp"
#include "iact/model/hier_encoder.hpp"
#include "iact/nn/layers.hpp"
#include "iact/nn/positional.hpp"

namespace iact {

/// Transformer over [CLS_z, qpos token, k action tokens] producing the mean
/// and clamped log-variance of the latent style variable.
template <typename T>
class StyleEncoder {
 public:
  static constexpr double kLogvarBound = 10.0;

  StyleEncoder() = default;
  StyleEncoder(ParameterStore<T>& store, const ModelConfig& config, const Rng& init);

  struct Posterior {
    Var<T> mu;      // 1 x latent_dim
    Var<T> logvar;  // 1 x latent_dim, within [-10, 10]
  };

  /// `qpos` is 1 x 2J, `actions` k x 2J, both normalized. Throws UsageError
  /// outside train mode.
  Posterior posterior(Graph<T>& g, const Var<T>& qpos, const Var<T>& actions, const nn::Mode& mode) const;

 private:
  ModelConfig config_;
  Parameter<T>* cls_ = nullptr;
  nn::Linear<T> qpos_proj_, action_proj_, out_;
  nn::PositionalEncoding<T> pe_;
  std::vector<nn::EncoderLayer<T>> layers_;
};

/// Normalized network input for one timestep.
template <typename T>
struct ModelInput {
  std::vector<T> qpos;           // 2J, arm1 first
  std::optional<Tensor<T>> image;  // H x W x C when the visual segment is on
};

template <typename T>
struct ModelOutput {
  DecodeResult<T> decode;
  std::optional<Var<T>> mu, logvar;

  const Var<T>& chunk() const { return decode.chunk; }
};

/// Encoder, two-arm decoder and (optionally) the style encoder with its
/// latent projection, sharing one parameter store.
template <typename T>
class InterActModel {
 public:
  /// Parameters are initialized from Rng(config.seed).substream("init").
  explicit InterActModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& params() noexcept { return store_; }
  const ParameterStore<T>& params() const noexcept { return store_; }
  const HierEncoder<T>& encoder() const noexcept { return encoder_; }
  const MultiArmDecoder<T>& decoder() const noexcept { return decoder_; }
  const StyleEncoder<T>& style() const noexcept { return style_; }

  EncodedState<T> encode(Graph<T>& g, const ModelInput<T>& in, const nn::Mode& mode) const;

  /// With `target` (k x 2J normalized) in train mode the latent is drawn from
  /// the posterior using `latent_rng` (or its mean when null); otherwise z = 0.
  ModelOutput<T> forward(Graph<T>& g, const ModelInput<T>& in, const Tensor<T>* target, const nn::Mode& mode,
                         Rng* latent_rng) const;

 private:
  ModelConfig config_;
  ParameterStore<T> store_;
  HierEncoder<T> encoder_;
  MultiArmDecoder<T> decoder_;
  StyleEncoder<T> style_;
  nn::Linear<T> latent_proj_;
};

/// 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar).
template <typename T>
Var<T> kl_to_standard_normal(const Var<T>& mu, const Var<T>& logvar);

/// Mean absolute error over the rows with mask != 0 (all rows when the mask is
/// empty). Throws DimensionError on shape mismatch.
template <typename T>
Var<T> masked_l1(const Var<T>& pred, const Tensor<T>& target, std::span<const std::uint8_t> row_mask = {});

template <typename T>
struct LossTerms {
  Var<T> total, l1, kl;
};

/// L1 reconstruction + beta * KL (KL term is zero without a posterior).
template <typename T>
LossTerms<T> chunk_loss(Graph<T>& g, const Var<T>& pred, const Tensor<T>& target, const std::optional<Var<T>>& mu,
                        const std::optional<Var<T>>& logvar, double beta,
                        std::span<const std::uint8_t> row_mask = {});

extern template class StyleEncoder<float>;
extern template class StyleEncoder<double>;
extern template class InterActModel<float>;
extern template class InterActModel<double>;

}  // namespace iact
