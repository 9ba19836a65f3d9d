#include "maqkd/rates.hpp"

#include <cmath>
#include <stdexcept>

#include "maqkd/channel.hpp"

namespace maqkd {

namespace {

double arm_transmittance(const SystemConfig& cfg) {
  return channel_transmittance(cfg.channel, cfg.protocol.total_distance_m / 2.0).total;
}

double attempt_rate(const SystemConfig& cfg) {
  return 1.0 / clock_unit(cfg.protocol.total_distance_m, cfg.protocol.signal_speed_m_per_s);
}

RatePoint make_point(double gain, double error_rate, double attempt_hz) {
  RatePoint pt;
  pt.gain = gain;
  pt.attempt_rate_hz = attempt_hz;
  if (gain > 0.0) {
    pt.qber = qber_from_gain(error_rate, gain);
    pt.corrected_rate = corrected_rate(gain, pt.qber);
  } else {
    pt.qber = 0.5;
    pt.corrected_rate = 0.0;
  }
  pt.total_rate_hz = attempt_hz * pt.corrected_rate;
  return pt;
}

}  // namespace

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double memory_error_rate(double error_prob) {
  return 2.0 * error_prob * (1.0 - error_prob);
}

double qber_from_gain(double error_rate, double gain) {
  if (!(gain > 0.0))
    throw std::invalid_argument("qber_from_gain: gain must be > 0");
  return std::min(0.5, error_rate / gain);
}

double corrected_rate(double gain, double qber, double ec_efficiency) {
  if (qber >= 0.5) return 0.0;  // beyond random guessing; no key survives
  return std::max(0.0, gain * (1.0 - ec_efficiency * binary_entropy(qber)));
}

double wcp_load_prob(double mean_photon_number, double path_efficiency) {
  return 1.0 - std::exp(-mean_photon_number * path_efficiency);
}

double sync_gain_sps(double photon_efficiency) {
  return 0.5 * photon_efficiency * photon_efficiency;
}

double sync_gain_wcp(double mean_photon_number, double photon_efficiency) {
  const double click = wcp_load_prob(mean_photon_number, photon_efficiency);
  return 0.5 * click * click;
}

double arm_load_prob(const SystemConfig& cfg) {
  const double arm = arm_transmittance(cfg);
  const double x = arm * cfg.memory.efficiency;
  if (cfg.source.kind == SourceKind::sps) return x;
  return wcp_load_prob(cfg.source.mean_photon_number, x);
}

double round_survival_prob(const SystemConfig& cfg) {
  const double t_unit =
      clock_unit(cfg.protocol.total_distance_m, cfg.protocol.signal_speed_m_per_s);
  return std::exp(-t_unit / cfg.memory.coherence_time_s);
}

double sync_gain(const SystemConfig& cfg) {
  const double eff = arm_transmittance(cfg) * cfg.detector.efficiency *
                     cfg.memory.efficiency * round_survival_prob(cfg);
  if (cfg.source.kind == SourceKind::sps) return sync_gain_sps(eff);
  return sync_gain_wcp(cfg.source.mean_photon_number, eff);
}

RatePoint sync_rate_point(const SystemConfig& cfg) {
  return make_point(sync_gain(cfg), memory_error_rate(cfg.memory.error_prob),
                    attempt_rate(cfg));
}

RatePoint bb84_reference(const SystemConfig& cfg) {
  const double link =
      channel_transmittance(cfg.channel, cfg.protocol.total_distance_m).total;
  const double gain = cfg.source.kind == SourceKind::sps
                          ? link * cfg.detector.efficiency
                          : wcp_load_prob(cfg.source.mean_photon_number,
                                          link * cfg.detector.efficiency);
  RatePoint pt;
  pt.gain = gain;
  pt.attempt_rate_hz = attempt_rate(cfg);
  pt.qber = cfg.detector.dark_count_prob / (gain + cfg.detector.dark_count_prob);
  pt.corrected_rate = corrected_rate(gain, pt.qber);
  pt.total_rate_hz = pt.attempt_rate_hz * pt.corrected_rate;
  return pt;
}

double async_guide_gain(const SystemConfig& cfg) {
  const double arm = arm_transmittance(cfg);
  const double survival = round_survival_prob(cfg);
  const double readout = cfg.detector.efficiency * cfg.memory.efficiency * survival;
  const double prefactor = 0.5 * readout * readout;
  if (cfg.source.kind == SourceKind::sps) return prefactor * arm;
  return prefactor * wcp_load_prob(cfg.source.mean_photon_number, arm * readout);
}

RatePoint async_guide_point(const SystemConfig& cfg) {
  return make_point(async_guide_gain(cfg), memory_error_rate(cfg.memory.error_prob),
                    attempt_rate(cfg));
}

ChainSolution async_chain_solution(double load_prob, double survival_prob) {
  if (!(load_prob >= 0.0) || !(load_prob <= 1.0))
    throw std::invalid_argument("async_chain_solution: load_prob must lie in [0, 1]");
  if (!(survival_prob >= 0.0) || !(survival_prob <= 1.0))
    throw std::invalid_argument("async_chain_solution: survival_prob must lie in [0, 1]");

  const double p = load_prob;
  const double s = survival_prob;
  ChainSolution sol;
  if (p == 0.0) return sol;  // coincidence unreachable; moments undefined
  if (p == 1.0) {
    sol.success_prob = 1.0;
    sol.mean_m = 1.0;
    sol.var_m = 0.0;
    return sol;
  }

  // One arm held: coincidence s*p, stay held (survive without partner, or
  // hand over to a fresh load) r = s(1-p) + (1-s)p, abort (1-s)(1-p).
  // r < 1 for every p in (0, 1), so the geometric sums below converge.
  const double r = s * (1.0 - p) + (1.0 - s) * p;
  const double w = 2.0 * p * (1.0 - p) * s * p;  // enter held state, then coincide
  const double g = 1.0 / (1.0 - r);
  const double prob = p * p + w * g;

  // Moments of the coincidence round index m (m = 1 when both load at once):
  // sum_{j>=2} j r^(j-2) = g + g^2,  sum_{j>=2} j^2 r^(j-2) = g + 2g^2 + (1+r)g^3.
  const double m1 = p * p + w * (g + g * g);
  const double m2 = p * p + w * (g + 2.0 * g * g + (1.0 + r) * g * g * g);

  sol.success_prob = prob;
  sol.mean_m = m1 / prob;
  sol.var_m = m2 / prob - (m1 / prob) * (m1 / prob);
  return sol;
}

ChainSolution async_chain_for_config(const SystemConfig& cfg) {
  return async_chain_solution(arm_load_prob(cfg), round_survival_prob(cfg));
}

double async_detected_gain(const SystemConfig& cfg) {
  const ChainSolution sol = async_chain_for_config(cfg);
  const double readout = round_survival_prob(cfg) * cfg.detector.efficiency;
  return sol.success_prob * readout * readout * 0.5;
}

RatePoint async_chain_point(const SystemConfig& cfg) {
  const ChainSolution sol = async_chain_for_config(cfg);
  const double gain = async_detected_gain(cfg);
  const double mean_m = sol.mean_m.value_or(1.0);
  return make_point(gain, memory_error_rate(cfg.memory.error_prob),
                    attempt_rate(cfg) / mean_m);
}

}  // namespace maqkd
