#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "maqkd/channel.hpp"
#include "maqkd/engine.hpp"
#include "maqkd/rates.hpp"

using namespace maqkd;

namespace {

// forces the per-round probabilities directly, bypassing the channel model
TrialContext hooked(double load_prob, double survive_prob) {
  TrialContext ctx;
  ctx.source = SourceKind::sps;
  ctx.load_prob = load_prob;
  ctx.survive_prob = survive_prob;
  ctx.detector_efficiency = 1.0;
  ctx.error_prob = 0.0;
  return ctx;
}

SimulationControls controls(std::uint64_t trials, std::uint64_t seed = 1,
                            MAverage avg = MAverage::loaded_coincidences) {
  SimulationControls c;
  c.trials = trials;
  c.seed = seed;
  c.m_average = avg;
  return c;
}

double freq(std::uint64_t hits, std::uint64_t n) { return double(hits) / double(n); }

double binom_sigma(double p, std::uint64_t n) {
  return std::sqrt(p * (1.0 - p) / double(n));
}

}  // namespace

TEST_CASE("trial context derives its probabilities from the config") {
  const SystemConfig cfg = default_config();
  const TrialContext ctx = make_trial_context(cfg);
  CHECK(ctx.source == SourceKind::sps);
  CHECK(ctx.load_prob == doctest::Approx(0.008976423247807543).epsilon(1e-12));
  CHECK(ctx.survive_prob == doctest::Approx(0.8750954774242988).epsilon(1e-12));
  CHECK(ctx.detector_efficiency == 1.0);
  CHECK(ctx.bsm_pass_prob == 0.5);
  CHECK(ctx.error_prob == doctest::Approx(memory_error_rate(1e-8)).epsilon(1e-15));
  CHECK(ctx.max_rounds == 10000);

  SystemConfig wcp = cfg;
  wcp.source.kind = SourceKind::wcp;
  const TrialContext wctx = make_trial_context(wcp);
  CHECK(wctx.load_mean == doctest::Approx(0.7 * 0.008976423247807543).epsilon(1e-12));
  CHECK(wctx.exp_neg_load_mean == doctest::Approx(std::exp(-wctx.load_mean)).epsilon(1e-15));
  CHECK(wctx.load_prob ==
        doctest::Approx(wcp_load_prob(0.7, 0.008976423247807543)).epsilon(1e-12));
}

TEST_CASE("synchronous attempts reproduce the product law") {
  TrialContext ctx = hooked(0.3, 0.8);
  const std::uint64_t n = 200000;
  BatchOptions opts;
  opts.collect_histogram = true;
  const TallySummary tally = run_batch(ctx, ProtocolMode::sync, controls(n), opts);

  CHECK(tally.n_trials == n);
  const double loaded_expected = 0.3 * 0.3;
  CHECK(std::abs(freq(tally.n_loaded, n) - loaded_expected) <
        4.0 * binom_sigma(loaded_expected, n));
  const double success_expected = 0.09 * 0.8 * 0.8 * 0.5;
  CHECK(std::abs(freq(tally.n_success, n) - success_expected) <
        4.0 * binom_sigma(success_expected, n));

  // every coincidence happens on the first attempt
  CHECK(tally.sum_m == tally.n_loaded);
  CHECK(tally.sum_m_sq == tally.n_loaded);
  REQUIRE(tally.m_histogram.size() == 2);
  CHECK(tally.m_histogram[0] == 0);
  CHECK(tally.m_histogram[1] == tally.n_loaded);
  CHECK(tally.n_truncated == 0);
}

TEST_CASE("waiting loop hits the closed-form coincidence law") {
  const std::uint64_t n = 200000;
  BatchOptions opts;
  opts.collect_histogram = true;
  const TallySummary tally =
      run_batch(hooked(0.5, 1.0), ProtocolMode::async, controls(n), opts);

  CHECK(std::abs(freq(tally.n_loaded, n) - 0.75) < 4.0 * binom_sigma(0.75, n));
  // readout costs one more survival round (free here) and the measurement half
  CHECK(std::abs(freq(tally.n_success, n) - 0.375) < 4.0 * binom_sigma(0.375, n));

  const double mean_m = double(tally.sum_m) / double(tally.n_loaded);
  const double var_m =
      double(tally.sum_m_sq) / double(tally.n_loaded) - mean_m * mean_m;
  CHECK(std::abs(mean_m - 7.0 / 3.0) <
        4.0 * std::sqrt((20.0 / 9.0) / double(tally.n_loaded)));
  CHECK(var_m == doctest::Approx(20.0 / 9.0).epsilon(0.05));

  // histogram integrity: totals must reproduce the moment sums
  std::uint64_t hist_count = 0, hist_sum = 0, hist_sum_sq = 0;
  for (std::size_t m = 0; m < tally.m_histogram.size(); ++m) {
    hist_count += tally.m_histogram[m];
    hist_sum += tally.m_histogram[m] * m;
    hist_sum_sq += tally.m_histogram[m] * m * m;
  }
  CHECK(hist_count == tally.n_loaded);
  CHECK(hist_sum == tally.sum_m);
  CHECK(hist_sum_sq == tally.sum_m_sq);
}

TEST_CASE("waiting loop agrees with the chain solution at a lossy point") {
  const double p = 0.2, s = 0.6;
  const std::uint64_t n = 200000;
  const TallySummary tally =
      run_batch(hooked(p, s), ProtocolMode::async, controls(n));
  const ChainSolution sol = async_chain_solution(p, s);

  CHECK(std::abs(freq(tally.n_loaded, n) - sol.success_prob) <
        4.0 * binom_sigma(sol.success_prob, n));
  const double mean_m = double(tally.sum_m) / double(tally.n_loaded);
  CHECK(std::abs(mean_m - *sol.mean_m) <
        4.0 * std::sqrt(*sol.var_m / double(tally.n_loaded)));

  // readout survival is independent of the waiting time for single photons
  const double detected_expected = sol.success_prob * s * s * 0.5;
  CHECK(std::abs(freq(tally.n_success, n) - detected_expected) <
        4.0 * binom_sigma(detected_expected, n));
}

TEST_CASE("stored-bit errors are counted independently of loading") {
  TrialContext ctx = hooked(0.1, 1.0);
  ctx.error_prob = memory_error_rate(1e-3);
  const std::uint64_t n = 1000000;
  const TallySummary tally = run_batch(ctx, ProtocolMode::sync, controls(n));
  const double expected = 2.0 * 1e-3 * (1.0 - 1e-3);
  CHECK(std::abs(freq(tally.n_error, n) - expected) < 4.0 * binom_sigma(expected, n));

  // even with no light at all the error counter keeps its rate
  TrialContext dark = hooked(0.0, 1.0);
  dark.error_prob = 0.5;
  const TallySummary dark_tally =
      run_batch(dark, ProtocolMode::sync, controls(100000));
  CHECK(dark_tally.n_loaded == 0);
  CHECK(dark_tally.n_success == 0);
  CHECK(std::abs(freq(dark_tally.n_error, 100000) - 0.5) <
        4.0 * binom_sigma(0.5, 100000));
}

TEST_CASE("memory-assisted waiting never detects less than lockstep loading") {
  SystemConfig cfg = default_config();
  cfg.protocol.total_distance_m = 5e3;
  cfg.memory.efficiency = 0.9;
  cfg.simulation.trials = 100000;

  cfg.protocol.mode = ProtocolMode::sync;
  const TallySummary sync_tally = run_batch(cfg, {});
  cfg.protocol.mode = ProtocolMode::async;
  const TallySummary async_tally = run_batch(cfg, {});

  const double q_sync = freq(sync_tally.n_success, sync_tally.n_trials);
  const double q_async = freq(async_tally.n_success, async_tally.n_trials);
  const double se = std::sqrt(binom_sigma(q_sync, sync_tally.n_trials) *
                                  binom_sigma(q_sync, sync_tally.n_trials) +
                              binom_sigma(q_async, async_tally.n_trials) *
                                  binom_sigma(q_async, async_tally.n_trials));
  CHECK(q_async >= q_sync - 4.0 * se);
}

TEST_CASE("round cap truncates long waits at the predicted rate") {
  TrialContext ctx = hooked(0.05, 1.0);
  ctx.max_rounds = 3;
  const std::uint64_t n = 200000;
  const TallySummary tally = run_batch(ctx, ProtocolMode::async, controls(n));

  // enter the waiting state, then two idle rounds push past the cap
  const double r = 1.0 - 0.05;  // lossless held photon, arrival-free round
  const double expected = 2.0 * 0.05 * 0.95 * r * r;
  CHECK(std::abs(freq(tally.n_truncated, n) - expected) <
        4.0 * binom_sigma(expected, n));

  // per-trial invariants around truncation and detection
  for (std::uint64_t i = 0; i < 5000; ++i) {
    TrialRng rng(controls(n).seed, i);
    const TrialOutcome o = run_trial_async(ctx, rng);
    if (o.truncated) {
      CHECK_FALSE(o.loaded_coincidence);
      CHECK_FALSE(o.detected_success);
      CHECK(o.rounds_used == ctx.max_rounds);
    }
    if (o.detected_success) CHECK(o.loaded_coincidence);
    if (o.loaded_coincidence) {
      CHECK(o.m_units >= 1);
      CHECK(o.rounds_used == o.m_units + 1);
    }
  }
}

TEST_CASE("batches are reproducible and independent of the worker count") {
  const TrialContext ctx = hooked(0.4, 0.9);
  BatchOptions one;
  one.workers = 1;
  one.collect_histogram = true;
  BatchOptions four;
  four.workers = 4;
  four.collect_histogram = true;

  const TallySummary a = run_batch(ctx, ProtocolMode::async, controls(50000), one);
  const TallySummary b = run_batch(ctx, ProtocolMode::async, controls(50000), one);
  const TallySummary c = run_batch(ctx, ProtocolMode::async, controls(50000), four);

  for (const TallySummary* other : {&b, &c}) {
    CHECK(a.n_trials == other->n_trials);
    CHECK(a.n_loaded == other->n_loaded);
    CHECK(a.n_success == other->n_success);
    CHECK(a.n_error == other->n_error);
    CHECK(a.n_truncated == other->n_truncated);
    CHECK(a.sum_m == other->sum_m);
    CHECK(a.sum_m_sq == other->sum_m_sq);
    CHECK(a.m_histogram == other->m_histogram);
  }
}

TEST_CASE("changing the seed changes the sampled tallies") {
  const TrialContext ctx = hooked(0.4, 0.9);
  const TallySummary a = run_batch(ctx, ProtocolMode::async, controls(20000, 1));
  const TallySummary b = run_batch(ctx, ProtocolMode::async, controls(20000, 2));
  const bool all_equal = a.n_loaded == b.n_loaded && a.n_success == b.n_success &&
                         a.sum_m == b.sum_m;
  CHECK_FALSE(all_equal);
}

TEST_CASE("the direct-link reference has no stochastic engine") {
  SystemConfig cfg = default_config();
  cfg.protocol.mode = ProtocolMode::bb84;
  CHECK_THROWS_AS(run_batch(cfg, {}), std::invalid_argument);
}

TEST_CASE("weak-pulse lockstep batches match the closed-form gain") {
  SystemConfig cfg = default_config();
  cfg.source.kind = SourceKind::wcp;
  cfg.protocol.total_distance_m = 2e3;
  cfg.simulation.trials = 300000;
  const double expected = sync_gain(cfg);
  const TallySummary tally = run_batch(cfg, {});
  CHECK(std::abs(freq(tally.n_success, tally.n_trials) - expected) <
        4.0 * binom_sigma(expected, tally.n_trials));
}

TEST_CASE("weak-pulse loading heralds on at least one stored photon") {
  TrialContext ctx;
  ctx.source = SourceKind::wcp;
  ctx.load_mean = 2.0;
  ctx.exp_neg_load_mean = std::exp(-2.0);
  ctx.load_prob = 1.0 - ctx.exp_neg_load_mean;
  ctx.survive_prob = 1.0;
  ctx.error_prob = 0.0;
  const std::uint64_t n = 100000;
  const TallySummary tally = run_batch(ctx, ProtocolMode::sync, controls(n));
  const double per_arm = 1.0 - std::exp(-2.0);
  const double expected = per_arm * per_arm;
  CHECK(std::abs(freq(tally.n_loaded, n) - expected) <
        4.0 * binom_sigma(expected, n));
}
