#pragma once

#include <cstdint>
#include <string_view>

namespace iact {

/// Counter-based generator. A stream is a 64-bit key; the i-th draw is a
/// SplitMix64 finalization of (key + (i + 1) * golden). Substreams derive new
/// keys from names or indices, so independent consumers (init, dropout,
/// latent sampling, env resets) never perturb each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes two draws.
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace iact
