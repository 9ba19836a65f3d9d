#pragma once

#include <optional>

#include "maqkd/config.hpp"

namespace maqkd {

// Closed-form operating point of one protocol configuration.
struct RatePoint {
  double gain = 0.0;             // success probability per protocol attempt
  double qber = 0.0;             // quantum bit error rate among successes
  double corrected_rate = 0.0;   // secret bits per attempt after error correction
  double attempt_rate_hz = 0.0;  // protocol attempts per second
  double total_rate_hz = 0.0;    // secret bits per second
};

// Absorbing-chain solution of the asynchronous loading process: two memories
// attempt Bernoulli loads each round, a held excitation survives a round with
// probability `survival`, and the process ends when both are held at once.
struct ChainSolution {
  double success_prob = 0.0;         // coincidence probability per attempt
  std::optional<double> mean_m;      // E[rounds until coincidence | success]
  std::optional<double> var_m;       // Var[rounds until coincidence | success]
};

// Shannon entropy of a binary variable, in bits; 0 outside (0, 1).
double binary_entropy(double p);

// Probability that exactly one of two identical memories flips the stored
// bit, each independently with probability `error_prob`.
double memory_error_rate(double error_prob);

// Error rate per attempt divided by success rate per attempt, capped at 1/2.
// Throws std::invalid_argument when gain <= 0.
double qber_from_gain(double error_rate, double gain);

// Secret fraction after one-way error correction at efficiency
// `ec_efficiency` (1 = Shannon limit), clamped at zero.
double corrected_rate(double gain, double qber, double ec_efficiency = 1.0);

// Probability that a weak coherent pulse of the given mean photon number
// delivers at least one photon through a path of the given efficiency.
double wcp_load_prob(double mean_photon_number, double path_efficiency);

// Coincidence probability per clock unit when both arms must deliver in the
// same round. `photon_efficiency` is the per-photon end-to-end factor of one
// arm (channel x detector x memory x one round of decay); the 1/2 is the
// linear-optics ceiling of the middle-node measurement.
double sync_gain_sps(double photon_efficiency);
double sync_gain_wcp(double mean_photon_number, double photon_efficiency);

// Per-round probability that one arm's memory loads (heralded absorption;
// the detector does not participate in loading).
double arm_load_prob(const SystemConfig& cfg);

// Per-photon probability of surviving one clock unit of storage.
double round_survival_prob(const SystemConfig& cfg);

// Full analytic operating point of the synchronous protocol.
double sync_gain(const SystemConfig& cfg);
RatePoint sync_rate_point(const SystemConfig& cfg);

// Direct-transmission reference over the full distance with no memories;
// its error floor comes from detector dark counts instead of memory flips.
RatePoint bb84_reference(const SystemConfig& cfg);

// Idealized asynchronous envelope: one arm's delivery per attempt suffices,
// so the gain carries a single channel factor instead of a squared one.
double async_guide_gain(const SystemConfig& cfg);
RatePoint async_guide_point(const SystemConfig& cfg);

// Chain solution for arbitrary load/survival probabilities, and for the
// loading process implied by a config. Exact for single-photon sources;
// for wcp sources the arm-level survival is treated as a single Bernoulli,
// which the stochastic engine refines per photon.
ChainSolution async_chain_solution(double load_prob, double survival_prob);
ChainSolution async_chain_for_config(const SystemConfig& cfg);

// Expected per-attempt detected-success probability of the asynchronous
// engine (coincidence, one confirmation round, detection, measurement).
double async_detected_gain(const SystemConfig& cfg);

// Analytic asynchronous operating point built from the chain solution; the
// attempt rate is divided by the mean rounds-to-coincidence.
RatePoint async_chain_point(const SystemConfig& cfg);

}  // namespace maqkd
