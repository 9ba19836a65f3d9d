#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maqkd {

// One result record: a single operating point of one model. Optional fields
// render as empty CSV cells / JSON nulls when a model has no such quantity
// (e.g. the direct-link reference has no memory columns, analytic rows have
// no trial counters).
struct OutputRow {
  double distance_km = 0.0;
  std::string mode;    // sync | async | bb84
  std::string source;  // sps | wcp
  std::optional<double> mu;
  std::optional<double> eta_mem;
  std::optional<double> tau_coh_ms;
  std::string model;  // mc | analytic | guide | bb84
  double q_gain = 0.0;
  std::optional<double> q_se;
  std::optional<double> qber;
  std::optional<double> r_corr;
  std::optional<double> r_total_hz;
  std::optional<double> mean_m;
  std::optional<double> std_m;
  std::optional<double> mean_clock_ms;
  std::optional<double> std_clock_ms;
  std::optional<std::uint64_t> n_trials;
  std::optional<std::uint64_t> n_success;
  std::optional<std::uint64_t> n_error;
  std::optional<std::uint64_t> n_truncated;
  std::optional<std::uint64_t> seed;
  std::string flags;  // semicolon-joined tokens, may be empty
};

// Provenance header stamped into every rendered file. Deliberately contains
// nothing time- or host-dependent: identical inputs give identical bytes.
struct FileMeta {
  std::string version;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

// The fixed 22-name column header shared by render_csv and parse_csv.
const std::vector<std::string>& csv_columns();

std::string render_csv(const std::vector<OutputRow>& rows, const FileMeta& meta);

// Inverse of render_csv: skips '#' comment lines, verifies the header row,
// maps empty cells back to nullopt. Throws std::runtime_error on malformed
// input.
std::vector<OutputRow> parse_csv(const std::string& text);

// {"meta": {...}, "rows": [...]} with nulls for absent fields.
std::string render_json(const std::vector<OutputRow>& rows, const FileMeta& meta);

// Two-column "x y" lines for plotting tools, preceded by '#' comments.
std::string render_curve(const std::vector<std::pair<double, double>>& points,
                         const std::vector<std::string>& comments);

// Writes via a sibling temp file and rename, so readers never observe a
// partially written result.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace maqkd
