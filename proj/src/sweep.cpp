#include "maqkd/sweep.hpp"

#include <cmath>
#include <stdexcept>

#include "maqkd/rates.hpp"

namespace maqkd {

namespace {

constexpr double kLowStatsExpectedSuccesses = 100.0;

void add_flag(std::string& flags, const char* token) {
  if (!flags.empty()) flags += ';';
  flags += token;
}

void fill_dimensions(OutputRow& row, const SystemConfig& cfg) {
  row.distance_km = cfg.protocol.total_distance_m / 1e3;
  row.mode = to_string(cfg.protocol.mode);
  row.source = to_string(cfg.source.kind);
  if (cfg.source.kind == SourceKind::wcp) row.mu = cfg.source.mean_photon_number;
  if (cfg.protocol.mode != ProtocolMode::bb84) {
    row.eta_mem = cfg.memory.efficiency;
    row.tau_coh_ms = cfg.memory.coherence_time_s * 1e3;
  }
}

double expected_gain(const SystemConfig& cfg) {
  return cfg.protocol.mode == ProtocolMode::sync ? sync_gain(cfg)
                                                 : async_detected_gain(cfg);
}

}  // namespace

OutputRow aggregate(const TallySummary& tally, const SystemConfig& cfg) {
  if (tally.n_trials == 0)
    throw std::invalid_argument("aggregate: empty batch");

  OutputRow row;
  fill_dimensions(row, cfg);
  row.model = "mc";
  row.seed = cfg.simulation.seed;
  row.n_trials = tally.n_trials;
  row.n_success = tally.n_success;
  row.n_error = tally.n_error;
  row.n_truncated = tally.n_truncated;

  const double n = static_cast<double>(tally.n_trials);
  const double q = static_cast<double>(tally.n_success) / n;
  row.q_gain = q;
  row.q_se = std::sqrt(q * (1.0 - q) / n);

  double r_corr = 0.0;
  if (tally.n_success > 0) {
    const double ratio =
        static_cast<double>(tally.n_error) / static_cast<double>(tally.n_success);
    row.qber = std::min(0.5, ratio);
    r_corr = corrected_rate(q, *row.qber);
  } else {
    add_flag(row.flags, "no_successes");
  }
  row.r_corr = r_corr;

  const std::uint64_t population = cfg.simulation.m_average == MAverage::loaded_coincidences
                                       ? tally.n_loaded
                                       : tally.n_success;
  const double t_unit_ms =
      clock_unit(cfg.protocol.total_distance_m, cfg.protocol.signal_speed_m_per_s) * 1e3;
  double total_rate_hz = 0.0;
  if (population > 0) {
    const double pop = static_cast<double>(population);
    const double mean_m = static_cast<double>(tally.sum_m) / pop;
    const double mean_m_sq = static_cast<double>(tally.sum_m_sq) / pop;
    const double var_m = std::max(0.0, mean_m_sq - mean_m * mean_m);
    row.mean_m = mean_m;
    row.std_m = std::sqrt(var_m);
    row.mean_clock_ms = mean_m * t_unit_ms;
    row.std_clock_ms = *row.std_m * t_unit_ms;
    total_rate_hz = (1e3 / t_unit_ms) / mean_m * r_corr;
  }
  row.r_total_hz = total_rate_hz;

  if (tally.n_truncated > 0) add_flag(row.flags, "has_truncated");
  if (expected_gain(cfg) * n < kLowStatsExpectedSuccesses) add_flag(row.flags, "low_stats");
  return row;
}

OutputRow analytic_row(const SystemConfig& cfg) {
  OutputRow row;
  fill_dimensions(row, cfg);
  RatePoint pt;
  switch (cfg.protocol.mode) {
    case ProtocolMode::sync:
      row.model = "analytic";
      pt = sync_rate_point(cfg);
      row.mean_m = 1.0;
      row.std_m = 0.0;
      row.mean_clock_ms = 1e3 / pt.attempt_rate_hz;
      row.std_clock_ms = 0.0;
      break;
    case ProtocolMode::async:
      row.model = "guide";
      pt = async_guide_point(cfg);
      break;
    case ProtocolMode::bb84:
      row.model = "bb84";
      pt = bb84_reference(cfg);
      break;
  }
  row.q_gain = pt.gain;
  row.qber = pt.qber;
  row.r_corr = pt.corrected_rate;
  row.r_total_hz = pt.total_rate_hz;
  return row;
}

std::vector<OutputRow> sweep(const SweepGrid& grid, const SystemConfig& base,
                             const SweepOptions& options) {
  const auto axis = [](const std::vector<double>& values, double fallback) {
    return values.empty() ? std::vector<double>{fallback} : values;
  };
  const std::vector<ProtocolMode> modes =
      grid.modes.empty() ? std::vector<ProtocolMode>{base.protocol.mode} : grid.modes;
  const std::vector<SourceKind> sources =
      grid.sources.empty() ? std::vector<SourceKind>{base.source.kind} : grid.sources;
  const auto distances = axis(grid.distances_km, base.protocol.total_distance_m / 1e3);
  const auto etas = axis(grid.memory_efficiencies, base.memory.efficiency);
  const auto taus = axis(grid.coherence_times_ms, base.memory.coherence_time_s * 1e3);
  const auto mus = axis(grid.mean_photon_numbers, base.source.mean_photon_number);
  const std::vector<double> single{0.0};  // placeholder for skipped axes

  std::vector<OutputRow> rows;
  for (ProtocolMode mode : modes) {
    const bool memoryless = mode == ProtocolMode::bb84;
    for (SourceKind source : sources) {
      const auto& mu_axis = source == SourceKind::wcp ? mus : single;
      const auto& eta_axis = memoryless ? single : etas;
      const auto& tau_axis = memoryless ? single : taus;
      for (double mu : mu_axis) {
        for (double eta : eta_axis) {
          for (double tau_ms : tau_axis) {
            for (double distance_km : distances) {
              SystemConfig cfg = base;
              cfg.protocol.mode = mode;
              cfg.source.kind = source;
              cfg.protocol.total_distance_m = distance_km * 1e3;
              if (source == SourceKind::wcp) cfg.source.mean_photon_number = mu;
              if (!memoryless) {
                cfg.memory.efficiency = eta;
                cfg.memory.coherence_time_s = tau_ms * 1e-3;
              }
              try {
                validate_config(cfg);
                rows.push_back(analytic_row(cfg));
                if (options.include_mc && !memoryless)
                  rows.push_back(aggregate(run_batch(cfg, options.batch), cfg));
              } catch (const std::exception&) {
                OutputRow failed;
                fill_dimensions(failed, cfg);
                failed.model = memoryless ? "bb84" : "analytic";
                failed.flags = "point_failed";
                rows.push_back(failed);
              }
            }
          }
        }
      }
    }
  }
  return rows;
}

bool RowFilter::matches(const OutputRow& row) const {
  if (!mode.empty() && row.mode != mode) return false;
  if (!source.empty() && row.source != source) return false;
  if (!model.empty() && row.model != model) return false;
  if (mu && (!row.mu || *row.mu != *mu)) return false;
  if (eta_mem && (!row.eta_mem || *row.eta_mem != *eta_mem)) return false;
  if (tau_coh_ms && (!row.tau_coh_ms || *row.tau_coh_ms != *tau_coh_ms)) return false;
  return true;
}

DistanceSeries series_from_rows(const std::vector<OutputRow>& rows,
                                const RowFilter& filter, const RowProjection& projection) {
  DistanceSeries series;
  for (const auto& row : rows) {
    if (!filter.matches(row)) continue;
    const auto value = projection(row);
    if (!value) continue;
    series.distances_km.push_back(row.distance_km);
    series.values.push_back(*value);
  }
  return series;
}

std::optional<double> find_crossover(const DistanceSeries& a, const DistanceSeries& b) {
  if (a.distances_km != b.distances_km)
    throw std::invalid_argument("find_crossover: series use different distance grids");
  if (a.distances_km.size() != a.values.size() || b.distances_km.size() != b.values.size())
    throw std::invalid_argument("find_crossover: malformed series");

  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] < b.values[i]) continue;
    if (i == 0) return a.distances_km[0];
    const double a0 = a.values[i - 1], b0 = b.values[i - 1];
    const double a1 = a.values[i], b1 = b.values[i];
    double g0, g1;
    if (a0 > 0.0 && b0 > 0.0 && a1 > 0.0 && b1 > 0.0) {
      g0 = std::log(a0) - std::log(b0);
      g1 = std::log(a1) - std::log(b1);
    } else {
      g0 = a0 - b0;
      g1 = a1 - b1;
    }
    const double d0 = a.distances_km[i - 1];
    const double d1 = a.distances_km[i];
    return d0 + g0 / (g0 - g1) * (d1 - d0);
  }
  return std::nullopt;
}

std::optional<double> qber_threshold_distance(const DistanceSeries& series,
                                              double threshold) {
  if (series.distances_km.size() != series.values.size())
    throw std::invalid_argument("qber_threshold_distance: malformed series");

  std::optional<std::size_t> last_below;
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (series.values[i] <= threshold) {
      last_below = i;
      continue;
    }
    if (last_below && *last_below == i - 1) {
      const double q0 = series.values[i - 1];
      const double q1 = series.values[i];
      const double d0 = series.distances_km[i - 1];
      const double d1 = series.distances_km[i];
      return d0 + (threshold - q0) / (q1 - q0) * (d1 - d0);
    }
  }
  if (!last_below) return std::nullopt;
  return series.distances_km[*last_below];
}

}  // namespace maqkd
