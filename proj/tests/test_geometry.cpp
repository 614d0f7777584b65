#include <doctest.h>

#include <cmath>

#include "fpn/geometry.hpp"

using namespace fpn;

namespace {

ArrayGeometry table2() { return ArrayGeometry{}; }

}  // namespace

TEST_CASE("element positions of the reference geometry") {
  const ArrayGeometry g = table2();
  const Point3 p11 = ae_position(g, 1, 1);
  CHECK(p11[0] == 0.0);
  CHECK(p11[1] == 0.0);
  CHECK(p11[2] == 0.0);
  const Point3 p12 = ae_position(g, 1, 2);
  CHECK(p12[0] == doctest::Approx(0.0));
  CHECK(p12[1] == doctest::Approx(0.0005));
  const Point3 p21 = ae_position(g, 2, 1);
  CHECK(p21[0] == doctest::Approx(0.0));
  CHECK(p21[1] == doctest::Approx(0.0635));
  CHECK_THROWS_AS(ae_position(g, 0, 1), InvalidInput);
  CHECK_THROWS_AS(ae_position(g, 1, 257), InvalidInput);
}

TEST_CASE("aperture and Rayleigh distance") {
  const ApertureInfo ref = aperture_and_rayleigh(table2());
  CHECK(ref.aperture == doctest::Approx(0.10041).epsilon(1e-4));
  CHECK(ref.rayleigh == doctest::Approx(20.16).epsilon(1e-3));

  ArrayGeometry single = table2();
  single.num_subarrays = 1;
  single.antennas_per_subarray = 1;
  const ApertureInfo one = aperture_and_rayleigh(single);
  CHECK(one.aperture == 0.0);
  CHECK(one.rayleigh == 0.0);

  const ApertureInfo desk = aperture_and_rayleigh(ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0));
  CHECK(desk.aperture == doctest::Approx(0.01556).epsilon(1e-3));
  CHECK(desk.rayleigh == doctest::Approx(0.484).epsilon(1e-3));
}

TEST_CASE("invalid geometries are rejected") {
  ArrayGeometry g = table2();
  g.antennas_per_subarray = 15;
  CHECK_THROWS_AS(g.validate(), InvalidInput);
  g = table2();
  g.sa_spacing = 0.0001;
  CHECK_THROWS_AS(g.validate(), InvalidInput);
  g = table2();
  g.carrier = 0.0;
  CHECK_THROWS_AS(g.validate(), InvalidInput);
}

TEST_CASE("array response is unit modulus") {
  const ArrayGeometry g = ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0);
  for (FieldMode mode : {FieldMode::force_far, FieldMode::force_near, FieldMode::automatic}) {
    const CVec a = array_response(g, 0.3, -0.7, 0.2, 300e9, mode);
    REQUIRE(a.size() == 64);
    CHECK((a.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("far-field first element carries the range phase") {
  const ArrayGeometry g = table2();
  const double r = 30.0;
  const CVec a = array_response(g, 0.4, 0.2, r, g.carrier, FieldMode::force_far);
  const cplx expected = std::polar(1.0, 2.0 * kPi * g.carrier * r / kSpeedOfLight);
  CHECK(std::abs(a(0) - expected) < 1e-9);
}

TEST_CASE("automatic mode switches at the Rayleigh distance") {
  const ArrayGeometry g = ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0);
  const double dr = aperture_and_rayleigh(g).rayleigh;
  for (double r : {0.5 * dr, 2.0 * dr}) {
    const FieldMode expected = r < dr ? FieldMode::force_near : FieldMode::force_far;
    const CVec a = array_response(g, 0.1, 0.5, r, g.carrier);
    const CVec b = array_response(g, 0.1, 0.5, r, g.carrier, expected);
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("far-field error shrinks with distance") {
  // Averaged over a grid of directions.
  for (const ArrayGeometry& g : {table2(), ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0)}) {
    const double dr = aperture_and_rayleigh(g).rayleigh;
    double near = 0.0, far = 0.0;
    for (double theta : {0.0, kPi / 6, kPi / 3})
      for (double phi : {0.0, kPi / 4, kPi / 2}) {
        near += farfield_error(g, phi, theta, 0.1 * dr, g.carrier);
        far += farfield_error(g, phi, theta, 10.0 * dr, g.carrier);
        CHECK(far < near);
      }
    CHECK(std::isfinite(near));
    CHECK(10.0 * std::log10(near / far) >= 20.0);
  }
}
