#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maqkd/config.hpp"
#include "maqkd/engine.hpp"
#include "maqkd/output.hpp"
#include "maqkd/rates.hpp"
#include "maqkd/sweep.hpp"

namespace {

using namespace maqkd;

double parse_double_token(const std::string& text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("bad number \"" + text + "\" in --distance-km");
  return value;
}

// Accepts "10", "1,5,25" or "start:stop[:step]" (inclusive stop, default step 1).
std::vector<double> expand_distance_spec(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string::size_type start = 0;
    while (true) {
      const auto pos = spec.find(':', start);
      parts.push_back(spec.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (parts.size() < 2 || parts.size() > 3)
      throw std::runtime_error("--distance-km range must be start:stop[:step]");
    const double lo = parse_double_token(parts[0]);
    const double hi = parse_double_token(parts[1]);
    const double step = parts.size() == 3 ? parse_double_token(parts[2]) : 1.0;
    if (!(step > 0.0) || hi < lo)
      throw std::runtime_error("--distance-km range must have stop >= start, step > 0");
    for (std::size_t i = 0;; ++i) {
      const double x = lo + static_cast<double>(i) * step;
      if (x > hi + step * 1e-9) break;
      out.push_back(x);
    }
  } else {
    std::string::size_type start = 0;
    while (true) {
      const auto pos = spec.find(',', start);
      out.push_back(parse_double_token(
          spec.substr(start, pos == std::string::npos ? pos : pos - start)));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  }
  if (out.empty()) throw std::runtime_error("--distance-km produced no values");
  return out;
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  write_file_atomic(out_path, content);
}

std::string render_rows(const std::vector<OutputRow>& rows, const FileMeta& meta,
                        const std::string& format) {
  if (format == "json") return render_json(rows, meta);
  return render_csv(rows, meta);
}

void fill_row_dimensions(OutputRow& row, const SystemConfig& cfg) {
  row.distance_km = cfg.protocol.total_distance_m / 1e3;
  row.mode = to_string(cfg.protocol.mode);
  row.source = to_string(cfg.source.kind);
  if (cfg.source.kind == SourceKind::wcp) row.mu = cfg.source.mean_photon_number;
  if (cfg.protocol.mode != ProtocolMode::bb84) {
    row.eta_mem = cfg.memory.efficiency;
    row.tau_coh_ms = cfg.memory.coherence_time_s * 1e3;
  }
}

// Loading-delay statistics of the asynchronous process in closed form;
// key-rate columns stay empty because this model describes loading only.
OutputRow chain_row(const SystemConfig& cfg) {
  OutputRow row;
  fill_row_dimensions(row, cfg);
  row.model = "chain";
  const ChainSolution sol = async_chain_for_config(cfg);
  row.q_gain = sol.success_prob;
  if (sol.mean_m) {
    const double t_unit_ms =
        clock_unit(cfg.protocol.total_distance_m, cfg.protocol.signal_speed_m_per_s) * 1e3;
    row.mean_m = *sol.mean_m;
    row.std_m = std::sqrt(std::max(0.0, *sol.var_m));
    row.mean_clock_ms = *sol.mean_m * t_unit_ms;
    row.std_clock_ms = *row.std_m * t_unit_ms;
  }
  return row;
}

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::string distance_spec;
  std::string mode;
  std::string source;
  std::string m_average;
  double mu = 0.0;
  double eta_mem = 0.0;
  double tau_ms = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::uint32_t max_rounds = 0;
  unsigned workers = 0;

  CLI::Option* opt_mu = nullptr;
  CLI::Option* opt_eta = nullptr;
  CLI::Option* opt_tau = nullptr;
  CLI::Option* opt_trials = nullptr;
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_max_rounds = nullptr;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_sim_controls) {
  cmd->add_option("--config", f.config_path, "JSON config file (defaults when omitted)");
  cmd->add_option("--out", f.out_path, "output file (stdout when omitted)");
  cmd->add_option("--format", f.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--distance-km", f.distance_spec,
                  "value, comma list, or start:stop[:step]");
  cmd->add_option("--mode", f.mode, "sync, async or bb84");
  cmd->add_option("--source", f.source, "sps or wcp");
  f.opt_mu = cmd->add_option("--mu", f.mu, "wcp mean photon number");
  f.opt_eta = cmd->add_option("--eta-mem", f.eta_mem, "memory efficiency");
  f.opt_tau = cmd->add_option("--tau-coh-ms", f.tau_ms, "memory coherence time [ms]");
  if (with_sim_controls) {
    f.opt_trials = cmd->add_option("--trials", f.trials, "attempts per point");
    f.opt_seed = cmd->add_option("--seed", f.seed, "base RNG seed");
    f.opt_max_rounds = cmd->add_option("--max-rounds", f.max_rounds,
                                       "waiting-round cap per attempt");
    cmd->add_option("--workers", f.workers, "worker threads (0: MAQKD_WORKERS, else 1)");
    cmd->add_option("--m-average", f.m_average,
                    "population for delay moments: detected or loaded")
        ->check(CLI::IsMember({"detected", "loaded"}));
  }
}

SystemConfig effective_config(const CommonFlags& f) {
  SystemConfig cfg = f.config_path.empty() ? default_config() : load_config(f.config_path);
  if (!f.mode.empty()) cfg.protocol.mode = protocol_mode_from_string(f.mode);
  if (!f.source.empty()) cfg.source.kind = source_kind_from_string(f.source);
  if (f.opt_mu && f.opt_mu->count()) cfg.source.mean_photon_number = f.mu;
  if (f.opt_eta && f.opt_eta->count()) cfg.memory.efficiency = f.eta_mem;
  if (f.opt_tau && f.opt_tau->count()) cfg.memory.coherence_time_s = f.tau_ms * 1e-3;
  if (f.opt_trials && f.opt_trials->count()) cfg.simulation.trials = f.trials;
  if (f.opt_seed && f.opt_seed->count()) cfg.simulation.seed = f.seed;
  if (f.opt_max_rounds && f.opt_max_rounds->count())
    cfg.simulation.max_rounds = f.max_rounds;
  if (!f.m_average.empty()) cfg.simulation.m_average = m_average_from_string(f.m_average);
  return validate_config(cfg);
}

FileMeta meta_for(const SystemConfig& cfg) {
  FileMeta meta;
  meta.version = kToolVersion;
  meta.config_hash = config_hash(cfg);
  meta.seed = cfg.simulation.seed;
  return meta;
}

int run_analytic(const CommonFlags& f) {
  const SystemConfig cfg = effective_config(f);
  SweepGrid grid;
  if (!f.distance_spec.empty()) grid.distances_km = expand_distance_spec(f.distance_spec);
  SweepOptions options;
  options.include_mc = false;
  const auto rows = sweep(grid, cfg, options);
  emit(render_rows(rows, meta_for(cfg), f.format), f.out_path);
  return 0;
}

int run_simulate(const CommonFlags& f, const std::string& histogram_path,
                 CLI::Option* opt_hook_load, double hook_load_prob,
                 CLI::Option* opt_hook_survive, double hook_survive_prob) {
  SystemConfig cfg = effective_config(f);
  if (!f.distance_spec.empty()) {
    const std::vector<double> distances = expand_distance_spec(f.distance_spec);
    if (distances.size() != 1)
      throw std::runtime_error(
          "simulate runs one operating point; pass a single --distance-km "
          "(use `sweep` for grids)");
    cfg.protocol.total_distance_m = distances.front() * 1e3;
    cfg = validate_config(cfg);
  }
  const BatchOptions batch{f.workers, !histogram_path.empty()};

  const bool hooked = opt_hook_load->count() || opt_hook_survive->count();
  if (hooked) {
    if (cfg.protocol.mode == ProtocolMode::bb84)
      throw std::runtime_error("hooked runs need --mode sync or async");
    TrialContext ctx;
    ctx.source = SourceKind::sps;
    ctx.load_prob = opt_hook_load->count() ? hook_load_prob : arm_load_prob(cfg);
    ctx.survive_prob =
        opt_hook_survive->count() ? hook_survive_prob : round_survival_prob(cfg);
    ctx.detector_efficiency = 1.0;
    ctx.error_prob = 0.0;
    ctx.max_rounds = cfg.simulation.max_rounds;
    if (ctx.load_prob < 0.0 || ctx.load_prob > 1.0 || ctx.survive_prob < 0.0 ||
        ctx.survive_prob > 1.0)
      throw std::runtime_error("hook probabilities must lie in [0, 1]");

    const TallySummary tally = run_batch(ctx, cfg.protocol.mode, cfg.simulation, batch);
    nlohmann::json doc;
    doc["meta"] = {{"version", kToolVersion},
                   {"seed", cfg.simulation.seed},
                   {"mode", to_string(cfg.protocol.mode)},
                   {"hook",
                    {{"load_prob", ctx.load_prob}, {"survive_prob", ctx.survive_prob}}}};
    nlohmann::json t;
    t["n_trials"] = tally.n_trials;
    t["n_loaded"] = tally.n_loaded;
    t["n_success"] = tally.n_success;
    t["n_truncated"] = tally.n_truncated;
    t["freq_loaded"] =
        static_cast<double>(tally.n_loaded) / static_cast<double>(tally.n_trials);
    t["freq_success"] =
        static_cast<double>(tally.n_success) / static_cast<double>(tally.n_trials);
    const std::uint64_t population = cfg.simulation.m_average == MAverage::loaded_coincidences
                                         ? tally.n_loaded
                                         : tally.n_success;
    if (population > 0) {
      const double pop = static_cast<double>(population);
      const double mean = static_cast<double>(tally.sum_m) / pop;
      const double var =
          std::max(0.0, static_cast<double>(tally.sum_m_sq) / pop - mean * mean);
      t["mean_m"] = mean;
      t["var_m"] = var;
      t["std_m"] = std::sqrt(var);
    } else {
      t["mean_m"] = nullptr;
      t["var_m"] = nullptr;
      t["std_m"] = nullptr;
    }
    doc["tally"] = std::move(t);
    if (!histogram_path.empty()) {
      std::vector<std::pair<double, double>> points;
      for (std::size_t m = 0; m < tally.m_histogram.size(); ++m)
        if (tally.m_histogram[m] > 0)
          points.emplace_back(static_cast<double>(m),
                              static_cast<double>(tally.m_histogram[m]));
      write_file_atomic(histogram_path,
                        render_curve(points, {"m count", "seed " +
                                                              std::to_string(cfg.simulation.seed)}));
    }
    emit(doc.dump(2) + "\n", f.out_path);
    return 0;
  }

  if (cfg.protocol.mode == ProtocolMode::bb84)
    throw std::runtime_error("the direct-link reference is analytic only; use `analytic`");
  const TallySummary tally = run_batch(cfg, batch);
  std::vector<OutputRow> rows;
  rows.push_back(analytic_row(cfg));
  rows.push_back(aggregate(tally, cfg));
  if (!histogram_path.empty()) {
    std::vector<std::pair<double, double>> points;
    for (std::size_t m = 0; m < tally.m_histogram.size(); ++m)
      if (tally.m_histogram[m] > 0)
        points.emplace_back(static_cast<double>(m),
                            static_cast<double>(tally.m_histogram[m]));
    write_file_atomic(histogram_path,
                      render_curve(points, {"m count",
                                            "seed " + std::to_string(cfg.simulation.seed)}));
  }
  emit(render_rows(rows, meta_for(cfg), f.format), f.out_path);
  return 0;
}

int run_sweep(const CommonFlags& f, const std::vector<double>& etas,
              const std::vector<double>& taus, const std::vector<double>& mus,
              const std::vector<std::string>& modes,
              const std::vector<std::string>& sources, bool analytic_only) {
  const SystemConfig cfg = effective_config(f);
  SweepGrid grid;
  if (!f.distance_spec.empty()) grid.distances_km = expand_distance_spec(f.distance_spec);
  grid.memory_efficiencies = etas;
  grid.coherence_times_ms = taus;
  grid.mean_photon_numbers = mus;
  for (const auto& m : modes) grid.modes.push_back(protocol_mode_from_string(m));
  for (const auto& s : sources) grid.sources.push_back(source_kind_from_string(s));
  SweepOptions options;
  options.include_mc = !analytic_only;
  options.batch.workers = f.workers;
  const auto rows = sweep(grid, cfg, options);
  emit(render_rows(rows, meta_for(cfg), f.format), f.out_path);
  return 0;
}

struct FigureSpec {
  std::vector<double> distances;
  std::vector<double> etas;
  std::vector<double> taus;
  bool with_reference = false;  // add memoryless direct-link curves
  bool loading_stats = false;   // chain rows instead of key-rate rows
  ProtocolMode mode = ProtocolMode::sync;
};

FigureSpec figure_spec(const std::string& name) {
  const auto span = [](int lo, int hi) {
    std::vector<double> out;
    for (int km = lo; km <= hi; ++km) out.push_back(static_cast<double>(km));
    return out;
  };
  FigureSpec spec;
  if (name == "sync-eff") {
    spec = {span(1, 35), {0.1, 0.5, 0.9}, {0.25}, true, false, ProtocolMode::sync};
  } else if (name == "sync-coh") {
    spec = {span(1, 35), {0.5}, {0.01, 0.1, 0.5}, true, false, ProtocolMode::sync};
  } else if (name == "async-eff") {
    spec = {span(1, 50), {0.1, 0.5, 0.9}, {0.25}, true, false, ProtocolMode::async};
  } else if (name == "async-coh") {
    spec = {span(1, 50), {0.5}, {0.01, 0.1, 0.5}, true, false, ProtocolMode::async};
  } else if (name == "mean-gc") {
    spec = {span(1, 50), {0.5}, {0.01, 0.1, 0.5}, false, true, ProtocolMode::async};
  } else {
    throw std::runtime_error(
        "unknown figure \"" + name +
        "\"; expected sync-eff, sync-coh, async-eff, async-coh or mean-gc");
  }
  return spec;
}

std::string curve_tag(SourceKind source, double mu) {
  std::string tag = to_string(source);
  if (source == SourceKind::wcp) tag += "_mu" + format_double(mu);
  return tag;
}

int run_compare(const CommonFlags& f, const std::string& figure,
                const std::string& out_dir) {
  if (!f.distance_spec.empty())
    throw std::runtime_error("figures define their own distance grids; "
                             "--distance-km is not accepted by `compare`");
  const SystemConfig base = effective_config(f);
  const FigureSpec spec = figure_spec(figure);
  const std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);

  struct SourcePoint {
    SourceKind kind;
    double mu;
  };
  const std::vector<SourcePoint> source_points = {
      {SourceKind::sps, 0.0}, {SourceKind::wcp, 0.05}, {SourceKind::wcp, 0.7}};

  std::vector<OutputRow> rows;
  std::vector<std::string> files;
  const auto write_curve_file = [&](const std::string& name,
                                    const std::vector<std::pair<double, double>>& pts,
                                    const std::string& ylabel) {
    const std::string filename = figure + "_" + name + ".dat";
    write_file_atomic(dir / filename,
                      render_curve(pts, {"maqkd " + std::string(kToolVersion),
                                         "figure " + figure, "distance_km " + ylabel}));
    files.push_back(filename);
  };

  for (const auto& sp : source_points) {
    for (double eta : spec.etas) {
      for (double tau_ms : spec.taus) {
        SystemConfig cfg = base;
        cfg.protocol.mode = spec.mode;
        cfg.source.kind = sp.kind;
        if (sp.kind == SourceKind::wcp) cfg.source.mean_photon_number = sp.mu;
        cfg.memory.efficiency = eta;
        cfg.memory.coherence_time_s = tau_ms * 1e-3;

        std::vector<std::pair<double, double>> curve;
        std::vector<std::pair<double, double>> spread;
        for (double km : spec.distances) {
          cfg.protocol.total_distance_m = km * 1e3;
          validate_config(cfg);
          if (spec.loading_stats) {
            OutputRow row = chain_row(cfg);
            if (row.mean_clock_ms) {
              curve.emplace_back(km, *row.mean_clock_ms);
              spread.emplace_back(km, *row.std_clock_ms);
            }
            rows.push_back(std::move(row));
          } else {
            OutputRow row = analytic_row(cfg);
            curve.emplace_back(km, row.r_total_hz.value_or(0.0));
            rows.push_back(std::move(row));
          }
        }
        std::string tag = curve_tag(sp.kind, sp.mu);
        if (spec.etas.size() > 1) tag += "_eta" + format_double(eta);
        if (spec.taus.size() > 1) tag += "_tau" + format_double(tau_ms);
        if (spec.loading_stats) {
          write_curve_file(tag + "_mean", curve, "mean_clock_ms");
          write_curve_file(tag + "_std", spread, "std_clock_ms");
        } else {
          write_curve_file(tag, curve, "r_total_hz");
        }
      }
    }
  }

  if (spec.with_reference) {
    for (const auto& sp : source_points) {
      SystemConfig cfg = base;
      cfg.protocol.mode = ProtocolMode::bb84;
      cfg.source.kind = sp.kind;
      if (sp.kind == SourceKind::wcp) cfg.source.mean_photon_number = sp.mu;
      std::vector<std::pair<double, double>> curve;
      for (double km : spec.distances) {
        cfg.protocol.total_distance_m = km * 1e3;
        validate_config(cfg);
        OutputRow row = analytic_row(cfg);
        curve.emplace_back(km, row.r_total_hz.value_or(0.0));
        rows.push_back(std::move(row));
      }
      write_curve_file("bb84_" + curve_tag(sp.kind, sp.mu), curve, "r_total_hz");
    }
  }

  const FileMeta meta = meta_for(base);
  const std::string csv_name = figure + ".csv";
  write_file_atomic(dir / csv_name, render_csv(rows, meta));

  nlohmann::json manifest;
  manifest["figure"] = figure;
  manifest["version"] = kToolVersion;
  manifest["config_hash"] = config_hash(base);
  manifest["csv"] = csv_name;
  manifest["curves"] = files;
  write_file_atomic(dir / (figure + "_manifest.json"), manifest.dump(2) + "\n");
  std::cout << "wrote " << (files.size() + 2) << " files to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maqkd: key-distribution rate explorer for memory-assisted links"};
  app.require_subcommand(1);

  CommonFlags analytic_flags;
  auto* analytic_cmd =
      app.add_subcommand("analytic", "closed-form rate curves over a distance grid");
  add_common_flags(analytic_cmd, analytic_flags, false);

  CommonFlags simulate_flags;
  std::string histogram_path;
  double hook_load_prob = 0.0;
  double hook_survive_prob = 0.0;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "stochastic engine at one operating point");
  add_common_flags(simulate_cmd, simulate_flags, true);
  simulate_cmd->add_option("--histogram", histogram_path,
                           "write the loading-delay histogram to this file");
  auto* opt_hook_load = simulate_cmd->add_option(
      "--hook-load-prob", hook_load_prob, "force the per-round load probability");
  auto* opt_hook_survive = simulate_cmd->add_option(
      "--hook-survive", hook_survive_prob, "force the per-round survival probability");

  CommonFlags sweep_flags;
  std::vector<double> sweep_etas, sweep_taus, sweep_mus;
  std::vector<std::string> sweep_modes, sweep_sources;
  bool analytic_only = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid study over distances and parameters");
  add_common_flags(sweep_cmd, sweep_flags, true);
  sweep_cmd->add_option("--grid-eta-mem", sweep_etas, "memory efficiency axis");
  sweep_cmd->add_option("--grid-tau-coh-ms", sweep_taus, "coherence time axis [ms]");
  sweep_cmd->add_option("--grid-mu", sweep_mus, "wcp photon-number axis");
  sweep_cmd->add_option("--grid-mode", sweep_modes, "mode axis (sync/async/bb84)");
  sweep_cmd->add_option("--grid-source", sweep_sources, "source axis (sps/wcp)");
  sweep_cmd->add_flag("--analytic-only", analytic_only, "skip the stochastic rows");

  CommonFlags compare_flags;
  std::string figure, out_dir = ".";
  auto* compare_cmd =
      app.add_subcommand("compare", "replicate a reference figure as csv + curve files");
  add_common_flags(compare_cmd, compare_flags, false);
  compare_cmd->add_option("--figure", figure,
                          "sync-eff | sync-coh | async-eff | async-coh | mean-gc")
      ->required();
  compare_cmd->add_option("--out-dir", out_dir, "directory for the emitted files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analytic_cmd) return run_analytic(analytic_flags);
    if (*simulate_cmd)
      return run_simulate(simulate_flags, histogram_path, opt_hook_load, hook_load_prob,
                          opt_hook_survive, hook_survive_prob);
    if (*sweep_cmd)
      return run_sweep(sweep_flags, sweep_etas, sweep_taus, sweep_mus, sweep_modes,
                       sweep_sources, analytic_only);
    if (*compare_cmd) return run_compare(compare_flags, figure, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
