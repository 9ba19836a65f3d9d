#pragma once

#include "maqkd/config.hpp"

namespace maqkd {

// One-way transmittance broken into its physical factors, each in [0, 1].
struct ArmTransmittance {
  double geometric;
  double atmospheric;
  double collection;
  double total;  // product of the three factors
};

// Fraction of a diverging Gaussian beam captured by a circular aperture of
// the configured diameter after propagating `distance_m`. Approaches 1 as
// the distance goes to 0 and falls off as 1/L^2 far beyond the Rayleigh
// range.
double geometric_transmittance(const ChannelParams& channel, double distance_m);

// Beer-Lambert attenuation from the configured dB/km extinction.
double atmospheric_transmittance(const ChannelParams& channel, double distance_m);

// Full one-way arm transmittance over `distance_m`. Middle-node protocols
// evaluate this at half the party separation, direct links at the full one.
ArmTransmittance channel_transmittance(const ChannelParams& channel, double distance_m);

}  // namespace maqkd
