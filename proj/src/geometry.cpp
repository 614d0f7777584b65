#include "fpn/geometry.hpp"

#include <cmath>

namespace fpn {

namespace {

int exact_sqrt(int n) {
  if (n < 1) return -1;
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : -1;
}

}  // namespace

int ArrayGeometry::sa_side() const { return exact_sqrt(num_subarrays); }
int ArrayGeometry::ae_side() const { return exact_sqrt(antennas_per_subarray); }

void ArrayGeometry::validate() const {
  require(sa_side() > 0, "geometry: S must be a positive perfect square");
  require(ae_side() > 0, "geometry: S_bar must be a positive perfect square");
  require(ae_spacing > 0.0, "geometry: d_a must be positive");
  require(sa_spacing >= ae_spacing, "geometry: d_sub must be >= d_a");
  require(carrier > 0.0, "geometry: carrier must be positive");
}

ArrayGeometry ArrayGeometry::from_wavelengths(int S, int S_bar, double carrier,
                                              double sa_spacing_wavelengths,
                                              double ae_spacing_wavelengths) {
  ArrayGeometry g;
  g.num_subarrays = S;
  g.antennas_per_subarray = S_bar;
  g.carrier = carrier;
  const double lambda = kSpeedOfLight / carrier;
  g.ae_spacing = ae_spacing_wavelengths * lambda;
  g.sa_spacing = sa_spacing_wavelengths * lambda;
  g.validate();
  return g;
}

Point3 ae_position(const ArrayGeometry& g, int s, int s_bar) {
  require(s >= 1 && s <= g.num_subarrays, "ae_position: SA index out of range");
  require(s_bar >= 1 && s_bar <= g.antennas_per_subarray,
          "ae_position: AE index out of range");
  const int rs = g.sa_side();
  const int ra = g.ae_side();
  const int m = (s - 1) / rs + 1;
  const int n = (s - 1) % rs + 1;
  const int mb = (s_bar - 1) / ra + 1;
  const int nb = (s_bar - 1) % ra + 1;
  const double pitch = (ra - 1) * g.ae_spacing + g.sa_spacing;
  return {(m - 1) * pitch + (mb - 1) * g.ae_spacing,
          (n - 1) * pitch + (nb - 1) * g.ae_spacing, 0.0};
}

ApertureInfo aperture_and_rayleigh(const ArrayGeometry& g) {
  g.validate();
  const double rs = g.sa_side();
  const double ra = g.ae_side();
  const double D =
      std::sqrt(2.0) * (rs * (ra - 1) * g.ae_spacing + (rs - 1) * g.sa_spacing);
  return {D, 2.0 * D * D / g.wavelength()};
}

CVec array_response(const ArrayGeometry& g, double phi, double theta, double r,
                    double freq, FieldMode mode) {
  require(r > 0.0, "array_response: distance must be positive");
  bool near = false;
  switch (mode) {
    case FieldMode::automatic: near = r < aperture_and_rayleigh(g).rayleigh; break;
    case FieldMode::force_near: near = true; break;
    case FieldMode::force_far: near = false; break;
  }
  const double tx = std::sin(theta) * std::cos(phi);
  const double ty = std::sin(theta) * std::sin(phi);
  const double tz = std::cos(theta);
  const double k = 2.0 * kPi * freq / kSpeedOfLight;

  const int S = g.num_subarrays;
  const int Sb = g.antennas_per_subarray;
  CVec a(S * Sb);
  for (int s = 1; s <= S; ++s) {
    for (int sb = 1; sb <= Sb; ++sb) {
      const Point3 p = ae_position(g, s, sb);
      double path;
      if (near) {
        const double dx = p[0] - r * tx, dy = p[1] - r * ty, dz = p[2] - r * tz;
        path = std::sqrt(dx * dx + dy * dy + dz * dz);
      } else {
        // First-order expansion of ||p - r t|| about p = 0.
        path = r - (p[0] * tx + p[1] * ty + p[2] * tz);
      }
      a((s - 1) * Sb + (sb - 1)) = std::polar(1.0, -k * path);
    }
  }
  return a;
}

double farfield_error(const ArrayGeometry& g, double phi, double theta, double r,
                      double freq) {
  const CVec near = array_response(g, phi, theta, r, freq, FieldMode::force_near);
  const CVec far = array_response(g, phi, theta, r, freq, FieldMode::force_far);
  return (far - near).squaredNorm() / near.squaredNorm();
}

}  // namespace fpn
