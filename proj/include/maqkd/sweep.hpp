#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "maqkd/config.hpp"
#include "maqkd/engine.hpp"
#include "maqkd/output.hpp"

namespace maqkd {

struct SweepOptions {
  BatchOptions batch;
  bool include_mc = true;  // false: closed-form rows only
};

// Axes of a parameter study; an empty axis inherits the base config's value.
// The photon-number axis applies to wcp sources only, and memory axes are
// skipped for the memoryless direct-link mode.
struct SweepGrid {
  std::vector<double> distances_km;
  std::vector<double> memory_efficiencies;
  std::vector<double> coherence_times_ms;
  std::vector<double> mean_photon_numbers;
  std::vector<ProtocolMode> modes;
  std::vector<SourceKind> sources;
};

// Turns batch totals into one result record (model "mc"): frequencies with
// a binomial standard error, the error ratio capped at 1/2, loading-delay
// moments over the configured population, and the delay-weighted key rate.
OutputRow aggregate(const TallySummary& tally, const SystemConfig& cfg);

// Closed-form record for the config's mode: "analytic" (synchronous),
// "guide" (asynchronous envelope) or "bb84" (direct link).
OutputRow analytic_row(const SystemConfig& cfg);

// Cartesian product of the grid over the base config. Every point emits its
// closed-form row, followed by a stochastic row when include_mc is set (the
// direct link is closed-form only). Rows keep deterministic order: modes,
// sources, photon numbers, memory efficiencies, coherence times, distances
// innermost, so fixed-parameter curves are contiguous. A failing point is
// recorded with the "point_failed" flag instead of aborting the sweep.
std::vector<OutputRow> sweep(const SweepGrid& grid, const SystemConfig& base,
                             const SweepOptions& options = {});

struct DistanceSeries {
  std::vector<double> distances_km;
  std::vector<double> values;
};

// Row subset selector; unset optionals match any value.
struct RowFilter {
  std::string mode;
  std::string source;
  std::string model;
  std::optional<double> mu;
  std::optional<double> eta_mem;
  std::optional<double> tau_coh_ms;

  bool matches(const OutputRow& row) const;
};

using RowProjection = std::function<std::optional<double>(const OutputRow&)>;

// Extracts (distance, value) pairs from matching rows in row order; rows
// whose projection is absent are skipped.
DistanceSeries series_from_rows(const std::vector<OutputRow>& rows,
                                const RowFilter& filter, const RowProjection& projection);

// First distance where series `a` reaches `b`, interpolated between grid
// points (log-space when all four bracketing values are positive). Requires
// identical distance grids. Returns nullopt when `a` stays below `b`.
std::optional<double> find_crossover(const DistanceSeries& a, const DistanceSeries& b);

// Longest distance at which the series is still at or below `threshold`,
// linearly interpolated at the first upward crossing; the last grid point
// when the series never exceeds it; nullopt when it always does.
std::optional<double> qber_threshold_distance(const DistanceSeries& series,
                                              double threshold);

}  // namespace maqkd
