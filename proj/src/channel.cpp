#include "fpn/channel.hpp"

#include <cmath>

namespace fpn {

Rng make_stream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt),
                    static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

void ChannelConfig::validate() const {
  require(num_paths >= 1, "channel: L must be >= 1");
  require(los_distance > 0.0, "channel: r_1 must be positive");
  require(nlos_min > 0.0 && nlos_max >= nlos_min, "channel: bad NLoS distance range");
  require(nlos_delay_max >= nlos_delay_min, "channel: bad delay range");
  require(k_abs >= 0.0, "channel: k_abs must be nonnegative");
}

cplx reflection_coefficient(double phi_in, cplx n_t, double sigma_rough, double freq) {
  const double ci = std::cos(phi_in);
  const cplx phi_ref = std::asin(std::sin(phi_in) / n_t);
  const cplx nc = n_t * std::cos(phi_ref);
  const cplx fresnel = (ci - nc) / (ci + nc);
  const double kf = freq / kSpeedOfLight;
  const double rough = std::exp(-8.0 * kPi * kPi * kf * kf * sigma_rough * sigma_rough * ci * ci);
  return fresnel * rough;
}

cplx path_loss(double freq, double r1, double k_abs, cplx gamma) {
  require(r1 > 0.0, "path_loss: distance must be positive");
  return std::abs(gamma) * (kSpeedOfLight / (4.0 * kPi * freq * r1)) *
         std::exp(-0.5 * k_abs * r1);
}

namespace {

// LoS gain at the carrier times sqrt(S S_bar): an unobstructed LoS path then
// has unit norm over the whole array.
double gain_reference(const ChannelConfig& cfg, const ArrayGeometry& g) {
  if (!cfg.normalize_gain) return 1.0;
  return std::abs(path_loss(g.carrier, cfg.los_distance, cfg.k_abs, 1.0)) *
         std::sqrt(static_cast<double>(g.num_antennas()));
}

cplx path_gain(const PathComponent& p, const ChannelConfig& cfg, const ArrayGeometry& g,
               double freq) {
  const cplx gamma = p.is_los ? cplx(1.0)
                              : reflection_coefficient(p.phi_in, cfg.refractive_index,
                                                       cfg.roughness, freq);
  return path_loss(freq, cfg.los_distance, cfg.k_abs, gamma) / gain_reference(cfg, g);
}

}  // namespace

std::vector<PathComponent> sample_paths(Rng& rng, const ChannelConfig& cfg,
                                        const ArrayGeometry& g) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<PathComponent> paths;
  const int n_nlos = cfg.num_paths - 1;
  if (cfg.los_present) {
    PathComponent p;
    p.is_los = true;
    p.theta = draw(cfg.theta_min, cfg.theta_max);
    p.phi = draw(cfg.phi_min, cfg.phi_max);
    p.r = cfg.los_distance;
    p.tau = cfg.los_delay;
    p.alpha = path_gain(p, cfg, g, g.carrier);
    paths.push_back(p);
  }
  for (int l = 0; l < n_nlos; ++l) {
    PathComponent p;
    p.theta = draw(cfg.theta_min, cfg.theta_max);
    p.phi = draw(cfg.phi_min, cfg.phi_max);
    p.phi_in = draw(cfg.phi_in_min, cfg.phi_in_max);
    p.r = draw(cfg.nlos_min, cfg.nlos_max);
    p.tau = draw(cfg.nlos_delay_min, cfg.nlos_delay_max);
    p.alpha = path_gain(p, cfg, g, g.carrier);
    paths.push_back(p);
  }
  return paths;
}

std::vector<PathComponent> paths_at_frequency(const std::vector<PathComponent>& paths,
                                              const ChannelConfig& cfg,
                                              const ArrayGeometry& g, double freq) {
  std::vector<PathComponent> out = paths;
  for (auto& p : out) p.alpha = path_gain(p, cfg, g, freq);
  return out;
}

ChannelSample assemble_channel(const std::vector<PathComponent>& paths,
                               const ArrayGeometry& g, double freq, FieldMode mode) {
  require(!paths.empty(), "assemble_channel: empty path list");
  ChannelSample out;
  out.paths = paths;
  out.h_complex = CVec::Zero(g.num_antennas());
  for (const auto& p : paths) {
    const cplx delay = std::polar(1.0, -2.0 * kPi * freq * p.tau);
    out.h_complex += (p.alpha * delay) * array_response(g, p.phi, p.theta, p.r, freq, mode);
  }
  out.h_real = stack_real(out.h_complex);
  return out;
}

}  // namespace fpn
