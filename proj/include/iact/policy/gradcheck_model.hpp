#pragma once

#include "iact/core/gradcheck.hpp"
#include "iact/model/config.hpp"

namespace iact {

/// Finite-difference check of the full training objective (encoder, decoder,
/// style encoder, L1 + beta * KL) in 64-bit on one synthetic sample drawn
/// from `config.seed`. Dropout masks and latent noise are replayed
/// identically for every evaluation.
GradCheckReport check_model_gradients(const ModelConfig& config, const GradCheckOptions& options);

}  // namespace iact
