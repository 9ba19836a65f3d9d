#pragma once

#include <cstdint>

namespace maqkd {

// Deterministic per-trial random stream. Each (seed, stream) pair derives an
// independent generator state, so trial i always consumes the same draws no
// matter how trials are batched across worker threads. The core is a 64-bit
// counter sequence passed through an avalanche finalizer; output is identical
// on every platform for the integer draws.
class TrialRng {
 public:
  TrialRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  bool bernoulli(double prob);

  // Product-method Poisson sample; the two-argument form reuses a
  // precomputed exp(-mean). Means above 500 are split in half recursively
  // so the product threshold stays representable.
  std::uint32_t poisson(double mean);
  std::uint32_t poisson_with_threshold(double mean, double exp_neg_mean);

  // Binomial thinning: survivors of `count` independent keep-with-prob trials.
  std::uint32_t thin(std::uint32_t count, double keep_prob);

 private:
  std::uint64_t state_;
};

}  // namespace maqkd
