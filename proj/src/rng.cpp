#include "maqkd/rng.hpp"

#include <cmath>

namespace maqkd {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

TrialRng::TrialRng(std::uint64_t seed, std::uint64_t stream) {
  // Hash seed and stream separately, then once more together, so nearby
  // trial indices land on unrelated points of the counter sequence.
  const std::uint64_t a = mix64(seed + kGamma);
  const std::uint64_t b = mix64(stream + 0xD1B54A32D192ED03ull);
  state_ = mix64(a ^ (b + kGamma));
}

std::uint64_t TrialRng::next_u64() {
  state_ += kGamma;
  return mix64(state_);
}

double TrialRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool TrialRng::bernoulli(double prob) {
  if (prob <= 0.0) return false;
  if (prob >= 1.0) return true;
  return next_unit() < prob;
}

std::uint32_t TrialRng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  if (mean > 500.0) {
    const double half = mean / 2.0;
    return poisson(half) + poisson(half);
  }
  return poisson_with_threshold(mean, std::exp(-mean));
}

std::uint32_t TrialRng::poisson_with_threshold(double mean, double exp_neg_mean) {
  if (mean <= 0.0) return 0;
  if (mean > 500.0) return poisson(mean);
  std::uint32_t k = 0;
  double product = next_unit();
  while (product > exp_neg_mean) {
    ++k;
    product *= next_unit();
  }
  return k;
}

std::uint32_t TrialRng::thin(std::uint32_t count, double keep_prob) {
  if (keep_prob >= 1.0) return count;
  if (keep_prob <= 0.0) return 0;
  std::uint32_t kept = 0;
  for (std::uint32_t i = 0; i < count; ++i)
    if (next_unit() < keep_prob) ++kept;
  return kept;
}

}  // namespace maqkd
