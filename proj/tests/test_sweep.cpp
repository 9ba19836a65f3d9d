#include <doctest.h>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "maqkd/rates.hpp"
#include "maqkd/sweep.hpp"

using namespace maqkd;

namespace {

TallySummary synthetic_tally() {
  TallySummary tally;
  tally.n_trials = 1000;
  tally.n_loaded = 100;
  tally.n_success = 50;
  tally.n_error = 10;
  tally.n_truncated = 5;
  tally.sum_m = 150;
  tally.sum_m_sq = 500;
  return tally;
}

}  // namespace

TEST_CASE("aggregate turns tallies into frequencies, moments and rates") {
  const SystemConfig cfg = default_config();  // averages over detected successes
  const OutputRow row = aggregate(synthetic_tally(), cfg);

  CHECK(row.model == "mc");
  CHECK(row.distance_km == 10.0);
  CHECK(*row.seed == 1);
  CHECK(*row.n_trials == 1000);
  CHECK(*row.n_success == 50);
  CHECK(*row.n_error == 10);
  CHECK(*row.n_truncated == 5);

  CHECK(row.q_gain == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(*row.q_se == doctest::Approx(std::sqrt(0.05 * 0.95 / 1000.0)).epsilon(1e-12));
  CHECK(*row.qber == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(*row.r_corr == doctest::Approx(0.05 * (1.0 - binary_entropy(0.2))).epsilon(1e-12));

  // moments over the 50 detected successes
  CHECK(*row.mean_m == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(*row.std_m == doctest::Approx(1.0).epsilon(1e-12));
  const double t_unit_ms = clock_unit(10e3, 2.998e8) * 1e3;
  CHECK(*row.mean_clock_ms == doctest::Approx(3.0 * t_unit_ms).epsilon(1e-12));
  CHECK(*row.std_clock_ms == doctest::Approx(t_unit_ms).epsilon(1e-12));
  CHECK(*row.r_total_hz ==
        doctest::Approx((1e3 / t_unit_ms) / 3.0 * *row.r_corr).epsilon(1e-12));

  CHECK(row.flags == "has_truncated;low_stats");
}

TEST_CASE("aggregate can average the delay over loaded coincidences instead") {
  SystemConfig cfg = default_config();
  cfg.simulation.m_average = MAverage::loaded_coincidences;
  const OutputRow row = aggregate(synthetic_tally(), cfg);
  CHECK(*row.mean_m == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(*row.std_m == doctest::Approx(std::sqrt(5.0 - 2.25)).epsilon(1e-12));
}

TEST_CASE("aggregate handles batches with no successes") {
  TallySummary tally;
  tally.n_trials = 1000;
  const OutputRow row = aggregate(tally, default_config());
  CHECK(row.q_gain == 0.0);
  CHECK_FALSE(row.qber.has_value());
  CHECK(*row.r_corr == 0.0);
  CHECK(*row.r_total_hz == 0.0);
  CHECK_FALSE(row.mean_m.has_value());
  CHECK(row.flags.find("no_successes") != std::string::npos);

  CHECK_THROWS_AS(aggregate(TallySummary{}, default_config()), std::invalid_argument);
}

TEST_CASE("closed-form rows carry the right model label per mode") {
  SystemConfig cfg = default_config();
  OutputRow row = analytic_row(cfg);
  CHECK(row.model == "analytic");
  CHECK(row.q_gain == doctest::Approx(3.08522986554719e-05).epsilon(1e-12));
  CHECK(*row.qber == doctest::Approx(0.0006482499091344961).epsilon(1e-12));
  CHECK(*row.r_total_hz == doctest::Approx(0.9177366933548173).epsilon(1e-12));
  CHECK(*row.mean_m == 1.0);
  CHECK(*row.std_m == 0.0);
  CHECK(*row.mean_clock_ms == doctest::Approx(clock_unit(10e3, 2.998e8) * 1e3).epsilon(1e-12));
  CHECK(*row.eta_mem == 0.5);
  CHECK(*row.tau_coh_ms == 0.25);
  CHECK_FALSE(row.mu.has_value());

  cfg.protocol.mode = ProtocolMode::async;
  cfg.protocol.total_distance_m = 25e3;
  row = analytic_row(cfg);
  CHECK(row.model == "guide");
  CHECK(row.q_gain == doctest::Approx(0.00015695332357676807).epsilon(1e-12));

  cfg.protocol.mode = ProtocolMode::bb84;
  cfg.protocol.total_distance_m = 10e3;
  row = analytic_row(cfg);
  CHECK(row.model == "bb84");
  CHECK(row.q_gain == doctest::Approx(0.004044186701450575).epsilon(1e-12));
  CHECK_FALSE(row.eta_mem.has_value());
  CHECK_FALSE(row.tau_coh_ms.has_value());
}

TEST_CASE("sweeps enumerate the grid in a stable order") {
  SweepGrid grid;
  grid.distances_km = {5.0, 10.0};
  grid.memory_efficiencies = {0.5, 0.9};
  SweepOptions options;
  options.include_mc = false;
  const std::vector<OutputRow> rows = sweep(grid, default_config(), options);

  REQUIRE(rows.size() == 4);
  CHECK(*rows[0].eta_mem == 0.5);
  CHECK(rows[0].distance_km == 5.0);
  CHECK(*rows[1].eta_mem == 0.5);
  CHECK(rows[1].distance_km == 10.0);
  CHECK(*rows[2].eta_mem == 0.9);
  CHECK(rows[2].distance_km == 5.0);
  CHECK(*rows[3].eta_mem == 0.9);
  CHECK(rows[3].distance_km == 10.0);
  for (const auto& row : rows) CHECK(row.model == "analytic");
}

TEST_CASE("sweeps pair every closed-form row with a stochastic row") {
  SweepGrid grid;
  grid.distances_km = {5.0, 10.0};
  grid.memory_efficiencies = {0.5, 0.9};
  SystemConfig base = default_config();
  base.simulation.trials = 200;
  const std::vector<OutputRow> rows = sweep(grid, base, {});

  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    CHECK(rows[i].model == "analytic");
    CHECK(rows[i + 1].model == "mc");
    CHECK(rows[i].distance_km == rows[i + 1].distance_km);
    CHECK(*rows[i].eta_mem == *rows[i + 1].eta_mem);
    CHECK(*rows[i + 1].n_trials == 200);
  }
}

TEST_CASE("the direct-link mode collapses the memory axes") {
  SweepGrid grid;
  grid.distances_km = {10.0};
  grid.memory_efficiencies = {0.1, 0.5, 0.9};
  grid.coherence_times_ms = {0.01, 0.1};
  grid.modes = {ProtocolMode::bb84};
  const std::vector<OutputRow> rows = sweep(grid, default_config(), {});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].model == "bb84");
  CHECK_FALSE(rows[0].eta_mem.has_value());
}

TEST_CASE("row filters and projections select contiguous curves") {
  SweepGrid grid;
  grid.distances_km = {5.0, 10.0, 20.0};
  grid.memory_efficiencies = {0.5, 0.9};
  SweepOptions options;
  options.include_mc = false;
  const std::vector<OutputRow> rows = sweep(grid, default_config(), options);

  RowFilter filter;
  filter.model = "analytic";
  filter.eta_mem = 0.9;
  const DistanceSeries series = series_from_rows(
      rows, filter, [](const OutputRow& row) { return std::optional<double>(row.q_gain); });
  REQUIRE(series.distances_km == std::vector<double>{5.0, 10.0, 20.0});
  CHECK(series.values[0] == doctest::Approx(0.0018801328287027983).epsilon(1e-12));
  CHECK(series.values[1] == doctest::Approx(9.996144764372897e-05).epsilon(1e-12));

  // rows whose projection is absent are dropped, not zero-filled
  std::vector<OutputRow> sparse = rows;
  sparse[0].qber.reset();
  const DistanceSeries qbers = series_from_rows(
      sparse, RowFilter{}, [](const OutputRow& row) { return row.qber; });
  CHECK(qbers.distances_km.size() == sparse.size() - 1);
}

TEST_CASE("crossover search interpolates between grid points") {
  const DistanceSeries a{{1.0, 2.0, 3.0}, {1.0, 2.0, 4.0}};
  const DistanceSeries b{{1.0, 2.0, 3.0}, {2.0, 2.0, 3.0}};
  const auto cross = find_crossover(a, b);
  REQUIRE(cross.has_value());
  CHECK(*cross == doctest::Approx(2.0).epsilon(1e-12));

  // already above at the first grid point
  const DistanceSeries high{{1.0, 2.0}, {5.0, 6.0}};
  const DistanceSeries low{{1.0, 2.0}, {1.0, 1.0}};
  CHECK(*find_crossover(high, low) == 1.0);

  // identical series touch immediately
  const DistanceSeries flat{{1.0, 2.0}, {1.0, 1.0}};
  CHECK(*find_crossover(flat, flat) == 1.0);

  // never reaches the target
  CHECK_FALSE(find_crossover(low, high).has_value());

  const DistanceSeries other_grid{{1.0, 2.5}, {1.0, 1.0}};
  CHECK_THROWS_AS(find_crossover(flat, other_grid), std::invalid_argument);
}

TEST_CASE("threshold search finds the last tolerable distance") {
  const DistanceSeries rising{{1.0, 2.0, 3.0}, {0.05, 0.10, 0.12}};
  auto result = qber_threshold_distance(rising, 0.11);
  REQUIRE(result.has_value());
  CHECK(*result == doctest::Approx(2.5).epsilon(1e-12));

  // never exceeds: the whole grid qualifies
  const DistanceSeries tame{{1.0, 2.0, 3.0}, {0.05, 0.08, 0.11}};
  CHECK(*qber_threshold_distance(tame, 0.11) == 3.0);

  // always above: nothing qualifies
  const DistanceSeries hot{{1.0, 2.0}, {0.2, 0.3}};
  CHECK_FALSE(qber_threshold_distance(hot, 0.11).has_value());

  // interpolation happens at the first upward crossing
  const DistanceSeries wiggle{{1.0, 2.0, 3.0, 4.0}, {0.05, 0.12, 0.10, 0.20}};
  CHECK(*qber_threshold_distance(wiggle, 0.11) ==
        doctest::Approx(1.0 + 0.06 / 0.07).epsilon(1e-12));
}

TEST_CASE("lockstep loading overtakes the direct link at the pinned distance") {
  SystemConfig base = default_config();
  base.detector.efficiency = 0.5;
  base.memory.efficiency = 0.9;

  SweepGrid grid;
  for (int km = 1; km <= 35; ++km) grid.distances_km.push_back(double(km));
  grid.modes = {ProtocolMode::sync, ProtocolMode::bb84};
  SweepOptions options;
  options.include_mc = false;
  const std::vector<OutputRow> rows = sweep(grid, base, options);
  REQUIRE(rows.size() == 70);

  const auto rate = [](const OutputRow& row) { return row.r_total_hz; };
  RowFilter sync_filter;
  sync_filter.mode = "sync";
  RowFilter bb84_filter;
  bb84_filter.mode = "bb84";
  const DistanceSeries assisted = series_from_rows(rows, sync_filter, rate);
  const DistanceSeries direct = series_from_rows(rows, bb84_filter, rate);

  const auto cross = find_crossover(assisted, direct);
  REQUIRE(cross.has_value());
  CHECK(*cross == doctest::Approx(23.241231518752592).epsilon(1e-9));
}
