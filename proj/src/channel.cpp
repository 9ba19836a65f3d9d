#include "maqkd/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace maqkd {

namespace {

void require_distance(double distance_m) {
  if (!std::isfinite(distance_m) || distance_m < 0.0)
    throw std::invalid_argument("channel: distance must be finite and >= 0");
}

}  // namespace

double geometric_transmittance(const ChannelParams& channel, double distance_m) {
  require_distance(distance_m);
  if (!(channel.beam_waist_m > 0.0) || !(channel.wavelength_m > 0.0))
    throw std::invalid_argument("channel: beam waist and wavelength must be > 0");
  if (!(channel.aperture_diameter_m > 0.0))
    throw std::invalid_argument("channel: aperture diameter must be > 0");

  const double w0 = channel.beam_waist_m;
  const double rayleigh_range = std::numbers::pi * w0 * w0 / channel.wavelength_m;
  const double ratio = distance_m / rayleigh_range;
  const double beam_radius = w0 * std::sqrt(1.0 + ratio * ratio);
  const double aperture_radius = channel.aperture_diameter_m / 2.0;
  const double x = aperture_radius / beam_radius;
  return 1.0 - std::exp(-2.0 * x * x);
}

double atmospheric_transmittance(const ChannelParams& channel, double distance_m) {
  require_distance(distance_m);
  if (!(channel.atm_loss_db_per_km >= 0.0))
    throw std::invalid_argument("channel: extinction must be >= 0");
  const double loss_db = channel.atm_loss_db_per_km * distance_m / 1e3;
  return std::pow(10.0, -loss_db / 10.0);
}

ArmTransmittance channel_transmittance(const ChannelParams& channel, double distance_m) {
  ArmTransmittance arm;
  arm.geometric = geometric_transmittance(channel, distance_m);
  arm.atmospheric = atmospheric_transmittance(channel, distance_m);
  arm.collection = channel.collection_efficiency;
  arm.total = arm.geometric * arm.atmospheric * arm.collection;
  return arm;
}

}  // namespace maqkd
