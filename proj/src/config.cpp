#include "maqkd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace maqkd {

using nlohmann::json;

namespace {

bool finite_in(double v, double lo, double hi) {
  return std::isfinite(v) && v >= lo && v <= hi;
}

bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

void check(std::vector<std::string>& errs, bool ok, const std::string& field,
           const std::string& why) {
  if (!ok) errs.push_back(field + ": " + why);
}

// Field scaling between the config-file unit and SI.
constexpr double kNm = 1e-9;
constexpr double kMm = 1e-3;
constexpr double kMs = 1e-3;
constexpr double kKm = 1e3;

double take_number(const json& section, const char* key, const std::string& path) {
  const json& v = section.at(key);
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

void reject_unknown(const json& section, const std::string& name,
                    std::initializer_list<const char*> known) {
  for (auto it = section.begin(); it != section.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) { ok = true; break; }
    if (!ok) throw ConfigError(name + "." + it.key() + ": unknown field");
  }
}

}  // namespace

SystemConfig default_config() { return SystemConfig{}; }

SystemConfig validate_config(const SystemConfig& raw) {
  std::vector<std::string> errs;
  const auto& ch = raw.channel;
  check(errs, finite_pos(ch.wavelength_m), "channel.wavelength_nm", "must be > 0");
  check(errs, finite_pos(ch.beam_waist_m), "channel.beam_waist_mm", "must be > 0");
  check(errs, finite_pos(ch.aperture_diameter_m), "channel.aperture_diameter_m", "must be > 0");
  check(errs, finite_in(ch.collection_efficiency, 0.0, 1.0),
        "channel.collection_efficiency", "must lie in [0, 1]");
  check(errs, std::isfinite(ch.atm_loss_db_per_km) && ch.atm_loss_db_per_km >= 0.0,
        "channel.atm_loss_db_per_km", "must be >= 0");

  const auto& mem = raw.memory;
  check(errs, finite_in(mem.efficiency, 0.0, 1.0), "memory.efficiency", "must lie in [0, 1]");
  check(errs, finite_pos(mem.coherence_time_s), "memory.coherence_time_ms", "must be > 0");
  check(errs, finite_in(mem.error_prob, 0.0, 0.5), "memory.error_prob", "must lie in [0, 0.5]");

  const auto& det = raw.detector;
  check(errs, finite_in(det.efficiency, 0.0, 1.0), "detector.efficiency", "must lie in [0, 1]");
  check(errs, finite_in(det.dark_count_prob, 0.0, 1.0), "detector.dark_count_prob",
        "must lie in [0, 1]");

  if (raw.source.kind == SourceKind::wcp)
    check(errs, finite_pos(raw.source.mean_photon_number), "source.mean_photon_number",
          "must be > 0 for a wcp source");

  const auto& pr = raw.protocol;
  check(errs, finite_pos(pr.total_distance_m), "protocol.distance_km", "must be > 0");
  check(errs, finite_pos(pr.signal_speed_m_per_s), "protocol.signal_speed_m_per_s", "must be > 0");

  check(errs, raw.simulation.trials >= 1, "simulation.trials", "must be >= 1");
  check(errs, raw.simulation.max_rounds >= 1, "simulation.max_rounds", "must be >= 1");

  if (!errs.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (i) msg += '\n';
      msg += errs[i];
    }
    throw ConfigError(msg);
  }
  return raw;
}

SystemConfig config_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown(root, "config",
                 {"channel", "memory", "detector", "source", "protocol", "simulation"});

  SystemConfig cfg = default_config();
  try {
    if (root.contains("channel")) {
      const json& s = root["channel"];
      reject_unknown(s, "channel",
                     {"wavelength_nm", "beam_waist_mm", "aperture_diameter_m",
                      "collection_efficiency", "atm_loss_db_per_km"});
      if (s.contains("wavelength_nm"))
        cfg.channel.wavelength_m = take_number(s, "wavelength_nm", "channel.wavelength_nm") * kNm;
      if (s.contains("beam_waist_mm"))
        cfg.channel.beam_waist_m = take_number(s, "beam_waist_mm", "channel.beam_waist_mm") * kMm;
      if (s.contains("aperture_diameter_m"))
        cfg.channel.aperture_diameter_m =
            take_number(s, "aperture_diameter_m", "channel.aperture_diameter_m");
      if (s.contains("collection_efficiency"))
        cfg.channel.collection_efficiency =
            take_number(s, "collection_efficiency", "channel.collection_efficiency");
      if (s.contains("atm_loss_db_per_km"))
        cfg.channel.atm_loss_db_per_km =
            take_number(s, "atm_loss_db_per_km", "channel.atm_loss_db_per_km");
    }
    if (root.contains("memory")) {
      const json& s = root["memory"];
      reject_unknown(s, "memory", {"efficiency", "coherence_time_ms", "error_prob"});
      if (s.contains("efficiency"))
        cfg.memory.efficiency = take_number(s, "efficiency", "memory.efficiency");
      if (s.contains("coherence_time_ms"))
        cfg.memory.coherence_time_s =
            take_number(s, "coherence_time_ms", "memory.coherence_time_ms") * kMs;
      if (s.contains("error_prob"))
        cfg.memory.error_prob = take_number(s, "error_prob", "memory.error_prob");
    }
    if (root.contains("detector")) {
      const json& s = root["detector"];
      reject_unknown(s, "detector", {"efficiency", "dark_count_prob"});
      if (s.contains("efficiency"))
        cfg.detector.efficiency = take_number(s, "efficiency", "detector.efficiency");
      if (s.contains("dark_count_prob"))
        cfg.detector.dark_count_prob = take_number(s, "dark_count_prob", "detector.dark_count_prob");
    }
    if (root.contains("source")) {
      const json& s = root["source"];
      reject_unknown(s, "source", {"kind", "mean_photon_number"});
      if (s.contains("kind")) {
        if (!s["kind"].is_string()) throw ConfigError("source.kind: expected a string");
        cfg.source.kind = source_kind_from_string(s["kind"].get<std::string>());
      }
      if (s.contains("mean_photon_number"))
        cfg.source.mean_photon_number =
            take_number(s, "mean_photon_number", "source.mean_photon_number");
    }
    if (root.contains("protocol")) {
      const json& s = root["protocol"];
      reject_unknown(s, "protocol", {"mode", "distance_km", "signal_speed_m_per_s"});
      if (s.contains("mode")) {
        if (!s["mode"].is_string()) throw ConfigError("protocol.mode: expected a string");
        cfg.protocol.mode = protocol_mode_from_string(s["mode"].get<std::string>());
      }
      if (s.contains("distance_km"))
        cfg.protocol.total_distance_m = take_number(s, "distance_km", "protocol.distance_km") * kKm;
      if (s.contains("signal_speed_m_per_s"))
        cfg.protocol.signal_speed_m_per_s =
            take_number(s, "signal_speed_m_per_s", "protocol.signal_speed_m_per_s");
    }
    if (root.contains("simulation")) {
      const json& s = root["simulation"];
      reject_unknown(s, "simulation", {"trials", "seed", "max_rounds", "m_average"});
      if (s.contains("trials")) {
        if (!s["trials"].is_number_unsigned())
          throw ConfigError("simulation.trials: expected a non-negative integer");
        cfg.simulation.trials = s["trials"].get<std::uint64_t>();
      }
      if (s.contains("seed")) {
        if (!s["seed"].is_number_unsigned())
          throw ConfigError("simulation.seed: expected a non-negative integer");
        cfg.simulation.seed = s["seed"].get<std::uint64_t>();
      }
      if (s.contains("max_rounds")) {
        if (!s["max_rounds"].is_number_unsigned())
          throw ConfigError("simulation.max_rounds: expected a non-negative integer");
        cfg.simulation.max_rounds = s["max_rounds"].get<std::uint32_t>();
      }
      if (s.contains("m_average")) {
        if (!s["m_average"].is_string())
          throw ConfigError("simulation.m_average: expected a string");
        cfg.simulation.m_average = m_average_from_string(s["m_average"].get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return validate_config(cfg);
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const SystemConfig& cfg) {
  json root;
  root["channel"] = {{"wavelength_nm", cfg.channel.wavelength_m / kNm},
                     {"beam_waist_mm", cfg.channel.beam_waist_m / kMm},
                     {"aperture_diameter_m", cfg.channel.aperture_diameter_m},
                     {"collection_efficiency", cfg.channel.collection_efficiency},
                     {"atm_loss_db_per_km", cfg.channel.atm_loss_db_per_km}};
  root["memory"] = {{"efficiency", cfg.memory.efficiency},
                    {"coherence_time_ms", cfg.memory.coherence_time_s / kMs},
                    {"error_prob", cfg.memory.error_prob}};
  root["detector"] = {{"efficiency", cfg.detector.efficiency},
                      {"dark_count_prob", cfg.detector.dark_count_prob}};
  root["source"] = {{"kind", to_string(cfg.source.kind)},
                    {"mean_photon_number", cfg.source.mean_photon_number}};
  root["protocol"] = {{"mode", to_string(cfg.protocol.mode)},
                      {"distance_km", cfg.protocol.total_distance_m / kKm},
                      {"signal_speed_m_per_s", cfg.protocol.signal_speed_m_per_s}};
  root["simulation"] = {{"trials", cfg.simulation.trials},
                        {"seed", cfg.simulation.seed},
                        {"max_rounds", cfg.simulation.max_rounds},
                        {"m_average", to_string(cfg.simulation.m_average)}};
  return root.dump(2);
}

std::uint64_t config_hash(const SystemConfig& cfg) {
  // FNV-1a over the canonical (key-sorted) serialized form.
  const std::string text = config_to_json_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double clock_unit(double distance_m, double signal_speed_m_per_s) {
  if (!(distance_m > 0.0) || !std::isfinite(distance_m))
    throw std::invalid_argument("clock_unit: distance must be > 0");
  if (!(signal_speed_m_per_s > 0.0) || !std::isfinite(signal_speed_m_per_s))
    throw std::invalid_argument("clock_unit: signal speed must be > 0");
  return distance_m / signal_speed_m_per_s;
}

const char* to_string(SourceKind kind) {
  return kind == SourceKind::sps ? "sps" : "wcp";
}

const char* to_string(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::sync: return "sync";
    case ProtocolMode::async: return "async";
    default: return "bb84";
  }
}

const char* to_string(MAverage population) {
  return population == MAverage::detected_successes ? "detected" : "loaded";
}

SourceKind source_kind_from_string(const std::string& text) {
  if (text == "sps") return SourceKind::sps;
  if (text == "wcp") return SourceKind::wcp;
  throw ConfigError("source.kind: expected \"sps\" or \"wcp\", got \"" + text + "\"");
}

ProtocolMode protocol_mode_from_string(const std::string& text) {
  if (text == "sync") return ProtocolMode::sync;
  if (text == "async") return ProtocolMode::async;
  if (text == "bb84") return ProtocolMode::bb84;
  throw ConfigError("protocol.mode: expected \"sync\", \"async\" or \"bb84\", got \"" + text + "\"");
}

MAverage m_average_from_string(const std::string& text) {
  if (text == "detected") return MAverage::detected_successes;
  if (text == "loaded") return MAverage::loaded_coincidences;
  throw ConfigError("simulation.m_average: expected \"detected\" or \"loaded\", got \"" + text + "\"");
}

}  // namespace maqkd
