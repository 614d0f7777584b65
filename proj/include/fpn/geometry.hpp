#pragma once

#include <array>

#include "fpn/types.hpp"

namespace fpn {

/// Planar array-of-subarrays in the x-y plane. sqrt(S) x sqrt(S) subarrays,
/// each a sqrt(S_bar) x sqrt(S_bar) uniform planar array.
struct ArrayGeometry {
  int num_subarrays = 4;          // S
  int antennas_per_subarray = 256;  // S_bar
  double ae_spacing = 0.0005;     // d_a [m]
  double sa_spacing = 0.056;      // d_sub [m]
  double carrier = 300e9;         // f_c [Hz]

  double wavelength() const { return kSpeedOfLight / carrier; }
  double spacing_ratio() const { return sa_spacing / ae_spacing; }
  int sa_side() const;  // sqrt(S)
  int ae_side() const;  // sqrt(S_bar)
  int num_antennas() const { return num_subarrays * antennas_per_subarray; }

  /// Throws InvalidInput when the invariants do not hold.
  void validate() const;

  /// Geometry with d_a = lambda/2 and d_sub = sa_spacing_wavelengths * lambda.
  static ArrayGeometry from_wavelengths(int S, int S_bar, double carrier,
                                        double sa_spacing_wavelengths,
                                        double ae_spacing_wavelengths = 0.5);
};

using Point3 = std::array<double, 3>;

/// Position of AE s_bar in SA s, both 1-based as in the array layout
/// s = (m-1)sqrt(S) + n. The first AE of the first SA sits at the origin.
Point3 ae_position(const ArrayGeometry& g, int s, int s_bar);

struct ApertureInfo {
  double aperture;  // D [m]
  double rayleigh;  // 2 D^2 / lambda [m]
};

ApertureInfo aperture_and_rayleigh(const ArrayGeometry& g);

enum class FieldMode { automatic, force_far, force_near };

/// Unit-modulus response over all S*S_bar elements, ordered s-major then s_bar.
/// In automatic mode the spherical (near) model is used iff r < D_Rayleigh.
CVec array_response(const ArrayGeometry& g, double phi, double theta, double r,
                    double freq, FieldMode mode = FieldMode::automatic);

/// ||a_far - a_near||^2 / ||a_near||^2.
double farfield_error(const ArrayGeometry& g, double phi, double theta, double r,
                      double freq);

}  // namespace fpn
