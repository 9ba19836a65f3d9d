#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace maqkd {

inline constexpr const char* kToolVersion = "0.1.0";

enum class SourceKind { sps, wcp };
enum class ProtocolMode { sync, async, bb84 };

// Population the loading-delay moments are averaged over. Detected successes
// is the physical convention; loaded coincidences maximizes sample count when
// studying the loading process on its own.
enum class MAverage { detected_successes, loaded_coincidences };

struct ChannelParams {
  double wavelength_m = 780e-9;
  double beam_waist_m = 3e-3;          // transmitter beam waist radius
  double aperture_diameter_m = 0.1;    // receiving telescope aperture
  double collection_efficiency = 0.7;  // fixed optics/coupling factor per arm
  double atm_loss_db_per_km = 0.1;
};

struct MemoryParams {
  double efficiency = 0.5;         // write-in/read-out efficiency per memory
  double coherence_time_s = 0.25e-3;
  double error_prob = 1e-8;        // per-memory bit-flip probability E
};

struct DetectorParams {
  double efficiency = 1.0;
  double dark_count_prob = 2.5e-4;  // per detection window, direct-link model only
};

struct SourceSpec {
  SourceKind kind = SourceKind::sps;
  double mean_photon_number = 0.7;  // wcp only; ignored for sps
};

struct ProtocolSpec {
  ProtocolMode mode = ProtocolMode::sync;
  double total_distance_m = 10e3;   // end-to-end separation of the two parties
  double signal_speed_m_per_s = 2.998e8;
};

struct SimulationControls {
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 1;
  std::uint32_t max_rounds = 10'000;  // waiting-round cap per trial
  MAverage m_average = MAverage::detected_successes;
};

struct SystemConfig {
  ChannelParams channel;
  MemoryParams memory;
  DetectorParams detector;
  SourceSpec source;
  ProtocolSpec protocol;
  SimulationControls simulation;
};

// Carries one message line per violated field, joined with newlines.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

SystemConfig default_config();

// Verifies every physical invariant (ranges, positivity, finiteness) and
// returns the config unchanged. Idempotent. Throws ConfigError naming each
// violated field by its config-file path.
SystemConfig validate_config(const SystemConfig& raw);

// JSON config files carry unit-suffixed field names (wavelength_nm,
// coherence_time_ms, distance_km, ...); parsing normalizes everything to SI.
// Unknown keys are rejected; omitted keys keep their defaults.
SystemConfig config_from_json_text(const std::string& text);
SystemConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const SystemConfig& cfg);

// Stable 64-bit digest of the normalized config, for output-file headers.
std::uint64_t config_hash(const SystemConfig& cfg);

// Duration of one global clock unit: the end-to-end transmission time L / v.
double clock_unit(double distance_m, double signal_speed_m_per_s);

const char* to_string(SourceKind kind);
const char* to_string(ProtocolMode mode);
const char* to_string(MAverage population);
SourceKind source_kind_from_string(const std::string& text);
ProtocolMode protocol_mode_from_string(const std::string& text);
MAverage m_average_from_string(const std::string& text);

}  // namespace maqkd
