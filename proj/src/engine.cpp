#include "maqkd/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include "maqkd/channel.hpp"
#include "maqkd/rates.hpp"

namespace maqkd {

namespace {

std::uint32_t sample_arm_load(const TrialContext& ctx, TrialRng& rng) {
  if (ctx.source == SourceKind::sps) return rng.bernoulli(ctx.load_prob) ? 1u : 0u;
  return rng.poisson_with_threshold(ctx.load_mean, ctx.exp_neg_load_mean);
}

// Readout of a coincidence: one more clock unit of storage on both arms,
// then detection; the measurement itself succeeds at the linear-optics cap.
bool read_out(const TrialContext& ctx, TrialRng& rng, std::uint32_t held,
              std::uint32_t fresh) {
  held = rng.thin(held, ctx.survive_prob);
  fresh = rng.thin(fresh, ctx.survive_prob);
  held = rng.thin(held, ctx.detector_efficiency);
  fresh = rng.thin(fresh, ctx.detector_efficiency);
  return held >= 1 && fresh >= 1 && rng.bernoulli(ctx.bsm_pass_prob);
}

}  // namespace

TrialContext make_trial_context(const SystemConfig& cfg) {
  TrialContext ctx;
  ctx.source = cfg.source.kind;
  if (cfg.source.kind == SourceKind::sps) {
    ctx.load_prob = arm_load_prob(cfg);
  } else {
    const double arm =
        channel_transmittance(cfg.channel, cfg.protocol.total_distance_m / 2.0).total;
    ctx.load_mean = cfg.source.mean_photon_number * arm * cfg.memory.efficiency;
    ctx.exp_neg_load_mean = std::exp(-ctx.load_mean);
    ctx.load_prob = 1.0 - ctx.exp_neg_load_mean;
  }
  ctx.survive_prob = round_survival_prob(cfg);
  ctx.detector_efficiency = cfg.detector.efficiency;
  ctx.error_prob = memory_error_rate(cfg.memory.error_prob);
  ctx.max_rounds = cfg.simulation.max_rounds;
  return ctx;
}

TrialOutcome run_trial_sync(const TrialContext& ctx, TrialRng& rng) {
  TrialOutcome out;
  out.error_event = rng.bernoulli(ctx.error_prob);
  const std::uint32_t a = sample_arm_load(ctx, rng);
  const std::uint32_t b = sample_arm_load(ctx, rng);
  out.rounds_used = 1;
  if (a == 0 || b == 0) return out;
  out.loaded_coincidence = true;
  out.m_units = 1;
  out.rounds_used = 2;
  out.detected_success = read_out(ctx, rng, a, b);
  return out;
}

TrialOutcome run_trial_async(const TrialContext& ctx, TrialRng& rng) {
  TrialOutcome out;
  out.error_event = rng.bernoulli(ctx.error_prob);
  std::uint32_t a = sample_arm_load(ctx, rng);
  std::uint32_t b = sample_arm_load(ctx, rng);
  out.rounds_used = 1;

  std::uint32_t held = 0;
  std::uint32_t fresh = 0;
  if (a > 0 && b > 0) {
    out.loaded_coincidence = true;
    out.m_units = 1;
    held = a;
    fresh = b;
  } else if (a == 0 && b == 0) {
    return out;
  } else {
    held = a > 0 ? a : b;
    for (std::uint32_t round = 2;; ++round) {
      if (round > ctx.max_rounds) {
        out.truncated = true;
        out.rounds_used = ctx.max_rounds;
        return out;
      }
      out.rounds_used = round;
      held = rng.thin(held, ctx.survive_prob);
      const std::uint32_t arrival = sample_arm_load(ctx, rng);
      if (held > 0 && arrival > 0) {
        out.loaded_coincidence = true;
        out.m_units = round;
        fresh = arrival;  // arrived this round, not yet stored a full unit
        break;
      }
      if (held == 0 && arrival == 0) return out;
      if (held == 0) held = arrival;  // hand the held role to the fresh load
    }
  }

  out.rounds_used = out.m_units + 1;
  out.detected_success = read_out(ctx, rng, held, fresh);
  return out;
}

void TallySummary::merge(const TallySummary& other) {
  n_trials += other.n_trials;
  n_loaded += other.n_loaded;
  n_success += other.n_success;
  n_error += other.n_error;
  n_truncated += other.n_truncated;
  sum_m += other.sum_m;
  sum_m_sq += other.sum_m_sq;
  if (m_histogram.size() < other.m_histogram.size())
    m_histogram.resize(other.m_histogram.size(), 0);
  for (std::size_t i = 0; i < other.m_histogram.size(); ++i)
    m_histogram[i] += other.m_histogram[i];
}

unsigned resolve_worker_count(unsigned requested) {
  unsigned workers = requested;
  if (workers == 0) {
    if (const char* env = std::getenv("MAQKD_WORKERS")) {
      char* end = nullptr;
      const unsigned long parsed = std::strtoul(env, &end, 10);
      if (end && *end == '\0' && parsed >= 1) workers = static_cast<unsigned>(parsed);
    }
  }
  if (workers == 0) workers = 1;
  return workers > 256 ? 256u : workers;
}

TallySummary run_batch(const TrialContext& ctx, ProtocolMode mode,
                       const SimulationControls& controls, const BatchOptions& opts) {
  if (mode == ProtocolMode::bb84)
    throw std::invalid_argument(
        "run_batch: the direct-link reference is analytic only");

  const bool track_loaded = controls.m_average == MAverage::loaded_coincidences;
  const auto run_range = [&](std::uint64_t lo, std::uint64_t hi, TallySummary& out) {
    TallySummary local;
    for (std::uint64_t i = lo; i < hi; ++i) {
      TrialRng rng(controls.seed, i);
      const TrialOutcome o = mode == ProtocolMode::sync ? run_trial_sync(ctx, rng)
                                                        : run_trial_async(ctx, rng);
      ++local.n_trials;
      if (o.loaded_coincidence) ++local.n_loaded;
      if (o.detected_success) ++local.n_success;
      if (o.error_event) ++local.n_error;
      if (o.truncated) ++local.n_truncated;
      const bool in_population = track_loaded ? o.loaded_coincidence : o.detected_success;
      if (in_population) {
        const std::uint64_t m = o.m_units;
        local.sum_m += m;
        local.sum_m_sq += m * m;
        if (opts.collect_histogram) {
          if (local.m_histogram.size() <= m) local.m_histogram.resize(m + 1, 0);
          ++local.m_histogram[m];
        }
      }
    }
    out = std::move(local);
  };

  const unsigned workers = resolve_worker_count(opts.workers);
  const std::uint64_t trials = controls.trials;
  if (workers <= 1 || trials < 2 * workers) {
    TallySummary total;
    run_range(0, trials, total);
    return total;
  }

  std::vector<TallySummary> parts(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::uint64_t chunk = trials / workers;
  const std::uint64_t remainder = trials % workers;
  std::uint64_t lo = 0;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t hi = lo + chunk + (w < remainder ? 1 : 0);
    threads.emplace_back(run_range, lo, hi, std::ref(parts[w]));
    lo = hi;
  }
  for (auto& thread : threads) thread.join();

  TallySummary total;
  for (const auto& part : parts) total.merge(part);
  return total;
}

TallySummary run_batch(const SystemConfig& cfg, const BatchOptions& opts) {
  return run_batch(make_trial_context(cfg), cfg.protocol.mode, cfg.simulation, opts);
}

}  // namespace maqkd
