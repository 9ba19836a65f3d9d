#include "maqkd/output.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

namespace maqkd {

namespace {

std::string hash_hex(std::uint64_t hash) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[hash & 0xF];
    hash >>= 4;
  }
  return out;
}

std::string header_comments(const FileMeta& meta) {
  std::string out;
  out += "# maqkd " + meta.version + "\n";
  out += "# config_hash " + hash_hex(meta.config_hash) + "\n";
  out += "# seed " + std::to_string(meta.seed) + "\n";
  return out;
}

std::string cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::string cell(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double_field(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("parse_csv: bad number \"" + text + "\" on line " +
                             std::to_string(line_no));
  return value;
}

std::optional<double> parse_opt_double(const std::string& text, std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  return parse_double_field(text, line_no);
}

std::optional<std::uint64_t> parse_opt_u64(const std::string& text, std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("parse_csv: bad integer \"" + text + "\" on line " +
                             std::to_string(line_no));
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "distance_km", "mode",        "source",     "mu",
      "eta_mem",     "tau_coh_ms",  "model",      "q_gain",
      "q_se",        "qber",        "r_corr",     "r_total_hz",
      "mean_m",      "std_m",       "mean_clock_ms", "std_clock_ms",
      "n_trials",    "n_success",   "n_error",    "n_truncated",
      "seed",        "flags"};
  return columns;
}

std::string render_csv(const std::vector<OutputRow>& rows, const FileMeta& meta) {
  std::string out = header_comments(meta);
  const auto& columns = csv_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    out += format_double(row.distance_km);
    out += ',' + row.mode;
    out += ',' + row.source;
    out += ',' + cell(row.mu);
    out += ',' + cell(row.eta_mem);
    out += ',' + cell(row.tau_coh_ms);
    out += ',' + row.model;
    out += ',' + format_double(row.q_gain);
    out += ',' + cell(row.q_se);
    out += ',' + cell(row.qber);
    out += ',' + cell(row.r_corr);
    out += ',' + cell(row.r_total_hz);
    out += ',' + cell(row.mean_m);
    out += ',' + cell(row.std_m);
    out += ',' + cell(row.mean_clock_ms);
    out += ',' + cell(row.std_clock_ms);
    out += ',' + cell(row.n_trials);
    out += ',' + cell(row.n_success);
    out += ',' + cell(row.n_error);
    out += ',' + cell(row.n_truncated);
    out += ',' + cell(row.seed);
    out += ',' + row.flags;
    out += '\n';
  }
  return out;
}

std::vector<OutputRow> parse_csv(const std::string& text) {
  std::vector<OutputRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields != csv_columns())
        throw std::runtime_error("parse_csv: unexpected header on line " +
                                 std::to_string(line_no));
      header_seen = true;
      continue;
    }
    if (fields.size() != csv_columns().size())
      throw std::runtime_error("parse_csv: expected " +
                               std::to_string(csv_columns().size()) + " fields, got " +
                               std::to_string(fields.size()) + " on line " +
                               std::to_string(line_no));
    OutputRow row;
    row.distance_km = parse_double_field(fields[0], line_no);
    row.mode = fields[1];
    row.source = fields[2];
    row.mu = parse_opt_double(fields[3], line_no);
    row.eta_mem = parse_opt_double(fields[4], line_no);
    row.tau_coh_ms = parse_opt_double(fields[5], line_no);
    row.model = fields[6];
    row.q_gain = parse_double_field(fields[7], line_no);
    row.q_se = parse_opt_double(fields[8], line_no);
    row.qber = parse_opt_double(fields[9], line_no);
    row.r_corr = parse_opt_double(fields[10], line_no);
    row.r_total_hz = parse_opt_double(fields[11], line_no);
    row.mean_m = parse_opt_double(fields[12], line_no);
    row.std_m = parse_opt_double(fields[13], line_no);
    row.mean_clock_ms = parse_opt_double(fields[14], line_no);
    row.std_clock_ms = parse_opt_double(fields[15], line_no);
    row.n_trials = parse_opt_u64(fields[16], line_no);
    row.n_success = parse_opt_u64(fields[17], line_no);
    row.n_error = parse_opt_u64(fields[18], line_no);
    row.n_truncated = parse_opt_u64(fields[19], line_no);
    row.seed = parse_opt_u64(fields[20], line_no);
    row.flags = fields[21];
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error("parse_csv: missing header row");
  return rows;
}

std::string render_json(const std::vector<OutputRow>& rows, const FileMeta& meta) {
  using nlohmann::json;
  json root;
  root["meta"] = {{"version", meta.version},
                  {"config_hash", hash_hex(meta.config_hash)},
                  {"seed", meta.seed}};
  json out_rows = json::array();
  const auto opt = [](const auto& v) -> json {
    if (v) return *v;
    return nullptr;
  };
  for (const auto& row : rows) {
    json r;
    r["distance_km"] = row.distance_km;
    r["mode"] = row.mode;
    r["source"] = row.source;
    r["mu"] = opt(row.mu);
    r["eta_mem"] = opt(row.eta_mem);
    r["tau_coh_ms"] = opt(row.tau_coh_ms);
    r["model"] = row.model;
    r["q_gain"] = row.q_gain;
    r["q_se"] = opt(row.q_se);
    r["qber"] = opt(row.qber);
    r["r_corr"] = opt(row.r_corr);
    r["r_total_hz"] = opt(row.r_total_hz);
    r["mean_m"] = opt(row.mean_m);
    r["std_m"] = opt(row.std_m);
    r["mean_clock_ms"] = opt(row.mean_clock_ms);
    r["std_clock_ms"] = opt(row.std_clock_ms);
    r["n_trials"] = opt(row.n_trials);
    r["n_success"] = opt(row.n_success);
    r["n_error"] = opt(row.n_error);
    r["n_truncated"] = opt(row.n_truncated);
    r["seed"] = opt(row.seed);
    r["flags"] = row.flags;
    out_rows.push_back(std::move(r));
  }
  root["rows"] = std::move(out_rows);
  return root.dump(2) + "\n";
}

std::string render_curve(const std::vector<std::pair<double, double>>& points,
                         const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& comment : comments) out += "# " + comment + "\n";
  for (const auto& [x, y] : points)
    out += format_double(x) + " " + format_double(y) + "\n";
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string() +
                             ": " + ec.message());
  }
}

}  // namespace maqkd
