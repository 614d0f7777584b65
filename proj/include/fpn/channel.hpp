#pragma once

#include <random>
#include <vector>

#include "fpn/geometry.hpp"

namespace fpn {

using Rng = std::mt19937_64;

/// Independent stream for item `index` under `master_seed`; streams do not
/// depend on generation order.
Rng make_stream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t salt = 0);

struct PathComponent {
  cplx alpha{0.0, 0.0};
  double phi = 0.0;     // azimuth [rad]
  double theta = 0.0;   // elevation [rad]
  double r = 1.0;       // [m]
  double tau = 0.0;     // [s]
  double phi_in = 0.0;  // incidence angle [rad], NLoS only
  bool is_los = false;
};

struct ChannelConfig {
  int num_paths = 5;           // L, counting the LoS path when present
  bool los_present = true;     // false models LoS blockage: L-1 NLoS paths
  double los_distance = 30.0;  // r_1 [m]
  double nlos_min = 10.0;      // [m]
  double nlos_max = 25.0;      // [m]
  double los_delay = 100e-9;
  double nlos_delay_min = 100e-9;
  double nlos_delay_max = 110e-9;
  double k_abs = 0.0033;       // [1/m]
  cplx refractive_index{2.24, -0.025};
  double roughness = 8.8e-5;   // sigma_rough [m]
  double theta_min = -kPi / 2, theta_max = kPi / 2;
  double phi_min = -kPi, phi_max = kPi;
  double phi_in_min = 0.0, phi_in_max = kPi / 2;
  FieldMode field_mode = FieldMode::automatic;
  /// Divide every gain by the LoS spread/absorption factor at the carrier and
  /// by sqrt(S S_bar), so an unobstructed LoS path has unit norm.
  bool normalize_gain = false;

  void validate() const;
};

struct ChannelSample {
  std::vector<PathComponent> paths;
  CVec h_complex;  // spatial channel, length S*S_bar
  Vec h_real;      // [Re; Im] of h_complex
};

/// Reflection coefficient of a rough dielectric for incidence angle phi_in.
cplx reflection_coefficient(double phi_in, cplx n_t, double sigma_rough, double freq);

/// |Gamma| * c/(4 pi f r_1) * exp(-k_abs r_1 / 2).
cplx path_loss(double freq, double r1, double k_abs, cplx gamma);

std::vector<PathComponent> sample_paths(Rng& rng, const ChannelConfig& cfg,
                                        const ArrayGeometry& g);

/// Same path geometry with gains re-evaluated at `freq` (wideband subcarriers).
std::vector<PathComponent> paths_at_frequency(const std::vector<PathComponent>& paths,
                                              const ChannelConfig& cfg,
                                              const ArrayGeometry& g, double freq);

ChannelSample assemble_channel(const std::vector<PathComponent>& paths,
                               const ArrayGeometry& g, double freq,
                               FieldMode mode = FieldMode::automatic);

}  // namespace fpn
