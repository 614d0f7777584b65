#pragma once

#include <limits>

#include "fpn/channel.hpp"

namespace fpn {

enum class NoiseKind { awgn, alpha_stable };

/// AWGN is specified by its SNR; alpha-stable noise by (alpha, beta) and the
/// generalized SNR, i.e. signal power over the dispersion gamma.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::awgn;
  double snr_db = 10.0;
  double gsnr_db = 15.0;
  double alpha = 2.0;
  double beta = 0.0;

  static NoiseSpec noiseless() {
    NoiseSpec s;
    s.snr_db = std::numeric_limits<double>::infinity();
    return s;
  }
  void validate() const;
};

/// Dispersion gamma = signal_power / 10^(gsnr/10).
double stable_dispersion(double signal_power, double gsnr_db);

/// One standard draw X ~ S(alpha, beta, scale, 0) via Chambers-Mallows-Stuck
/// (Nolan's S1 parameterization). For alpha = 2 the law is N(0, 2 scale^2).
double sample_alpha_stable(Rng& rng, double alpha, double beta, double scale);

/// `signal_power` is the per-component power of the noiseless measurement.
/// AWGN: each component has variance signal_power / 10^(snr/10).
/// Alpha-stable: i.i.d. components with scale gamma^(1/alpha).
Vec sample_noise(Rng& rng, const NoiseSpec& spec, double signal_power, Eigen::Index dim);

}  // namespace fpn
