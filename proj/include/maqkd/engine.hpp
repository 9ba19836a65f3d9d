#pragma once

#include <cstdint>
#include <vector>

#include "maqkd/config.hpp"
#include "maqkd/rng.hpp"

namespace maqkd {

// Precomputed per-trial sampling parameters. Normally derived from a config
// via make_trial_context; tests and the CLI may construct one directly to
// force the loading and survival probabilities.
struct TrialContext {
  SourceKind source = SourceKind::sps;
  double load_prob = 0.0;          // sps: per-round Bernoulli load probability
  double load_mean = 0.0;          // wcp: per-round Poisson mean per arm
  double exp_neg_load_mean = 1.0;  // cached exp(-load_mean)
  double survive_prob = 1.0;       // per photon per clock unit of storage
  double detector_efficiency = 1.0;
  double bsm_pass_prob = 0.5;      // linear-optics measurement ceiling
  double error_prob = 0.0;         // per-attempt stored-bit flip probability
  std::uint32_t max_rounds = 10'000;
};

TrialContext make_trial_context(const SystemConfig& cfg);

struct TrialOutcome {
  bool loaded_coincidence = false;  // both memories held photons at once
  bool detected_success = false;    // coincidence survived readout + measurement
  bool error_event = false;
  bool truncated = false;           // waiting exceeded max_rounds
  std::uint32_t m_units = 0;        // coincidence round index, valid when loaded
  std::uint32_t rounds_used = 0;
};

// One protocol attempt. The draw order is fixed (error event, arm A load,
// arm B load, then per-round thinning), so a given (seed, trial) pair always
// produces the same outcome regardless of batching.
TrialOutcome run_trial_sync(const TrialContext& ctx, TrialRng& rng);
TrialOutcome run_trial_async(const TrialContext& ctx, TrialRng& rng);

// Batch totals. The loading-delay sums are kept in integers so that merging
// per-worker partials is exact and the final statistics are byte-identical
// for every worker count.
struct TallySummary {
  std::uint64_t n_trials = 0;
  std::uint64_t n_loaded = 0;
  std::uint64_t n_success = 0;
  std::uint64_t n_error = 0;
  std::uint64_t n_truncated = 0;
  std::uint64_t sum_m = 0;     // over the configured m-average population
  std::uint64_t sum_m_sq = 0;
  std::vector<std::uint64_t> m_histogram;  // index = m, present when collected

  void merge(const TallySummary& other);
};

struct BatchOptions {
  unsigned workers = 0;  // 0: MAQKD_WORKERS env var, else 1
  bool collect_histogram = false;
};

// Worker-count policy: an explicit request wins, then a positive integer in
// MAQKD_WORKERS, else 1. Values are clamped to [1, 256].
unsigned resolve_worker_count(unsigned requested);

// Runs controls.trials independent attempts, chunked across workers with one
// RNG stream per trial index. Direct-link mode has no stochastic engine and
// throws std::invalid_argument.
TallySummary run_batch(const TrialContext& ctx, ProtocolMode mode,
                       const SimulationControls& controls,
                       const BatchOptions& opts = {});
TallySummary run_batch(const SystemConfig& cfg, const BatchOptions& opts = {});

}  // namespace maqkd
