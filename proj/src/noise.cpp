#include "fpn/noise.hpp"

#include <cmath>

namespace fpn {

void NoiseSpec::validate() const {
  if (kind == NoiseKind::alpha_stable) {
    require(alpha > 0.0 && alpha <= 2.0, "noise: alpha must lie in (0, 2]");
    require(beta >= -1.0 && beta <= 1.0, "noise: beta must lie in [-1, 1]");
    require(std::isfinite(gsnr_db), "noise: GSNR must be finite");
  }
}

double stable_dispersion(double signal_power, double gsnr_db) {
  return signal_power / std::pow(10.0, gsnr_db / 10.0);
}

double sample_alpha_stable(Rng& rng, double alpha, double beta, double scale) {
  require(alpha > 0.0 && alpha <= 2.0, "alpha-stable: alpha must lie in (0, 2]");
  require(beta >= -1.0 && beta <= 1.0, "alpha-stable: beta must lie in [-1, 1]");
  require(scale > 0.0, "alpha-stable: scale must be positive");
  std::uniform_real_distribution<double> uni(-kPi / 2, kPi / 2);
  std::exponential_distribution<double> expo(1.0);
  double v = uni(rng);
  while (std::abs(v) >= kPi / 2) v = uni(rng);
  double w = expo(rng);
  while (w <= 0.0) w = expo(rng);

  if (std::abs(alpha - 1.0) < 1e-12) {
    const double half_pi = kPi / 2;
    const double x = (2.0 / kPi) * ((half_pi + beta * v) * std::tan(v) -
                                    beta * std::log(half_pi * w * std::cos(v) /
                                                    (half_pi + beta * v)));
    return scale * x + (2.0 / kPi) * beta * scale * std::log(scale);
  }
  const double t = beta * std::tan(kPi * alpha / 2);
  const double b = std::atan(t) / alpha;
  const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
  const double x = s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  return scale * x;
}

Vec sample_noise(Rng& rng, const NoiseSpec& spec, double signal_power, Eigen::Index dim) {
  require(dim > 0, "sample_noise: dim must be positive");
  spec.validate();
  Vec n = Vec::Zero(dim);
  if (spec.kind == NoiseKind::awgn) {
    if (std::isinf(spec.snr_db) && spec.snr_db > 0) return n;
    const double sigma = std::sqrt(signal_power / std::pow(10.0, spec.snr_db / 10.0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < dim; ++i) n(i) = sigma * gauss(rng);
    return n;
  }
  const double scale = std::pow(stable_dispersion(signal_power, spec.gsnr_db), 1.0 / spec.alpha);
  for (Eigen::Index i = 0; i < dim; ++i)
    n(i) = sample_alpha_stable(rng, spec.alpha, spec.beta, scale);
  return n;
}

}  // namespace fpn
