#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "fpn/dataset.hpp"

using namespace fpn;
namespace fs = std::filesystem;

namespace {

ArrayGeometry desk() { return ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0); }

SampleSpec desk_spec() {
  SampleSpec s;
  const double dr = aperture_and_rayleigh(desk()).rayleigh;
  s.channel.los_distance = 1.5 * dr;
  s.channel.nlos_min = 0.5 * dr;
  s.channel.nlos_max = 1.25 * dr;
  s.channel.normalize_gain = true;
  return s;
}

std::string bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("samples do not depend on generation order") {
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  const Dataset ds = generate_dataset(3, desk_spec(), op, 10);
  for (Eigen::Index j : {9, 0, 4}) {
    const DrawnSample s = draw_sample(3, static_cast<std::uint64_t>(j), desk_spec(), op);
    CHECK((s.h - ds.h.col(j)).norm() == 0.0);
    CHECK((s.y - ds.y.col(j)).norm() == 0.0);
  }
}

TEST_CASE("samples are consistent with the operator") {
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  SampleSpec spec = desk_spec();
  spec.snr_min_db = spec.snr_max_db = 10.0;
  const DrawnSample s = draw_sample(4, 0, spec, op);
  CHECK((s.h - op.to_representation(s.channel.h_complex)).norm() < 1e-12);
  const Vec clean = op.M * s.h;
  const Vec noise = s.y - clean;
  const double snr = 10.0 * std::log10(clean.squaredNorm() / noise.squaredNorm());
  CHECK(std::abs(snr - 10.0) < 2.0);
  CHECK(s.snr_db == 10.0);
}

TEST_CASE("SNR draws stay in range") {
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  const Dataset ds = generate_dataset(5, desk_spec(), op, 200);
  for (double s : ds.snr_db) {
    CHECK(s >= 0.0);
    CHECK(s <= 20.0);
  }
}

TEST_CASE("same seed gives identical dataset files") {
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  const fs::path a = fs::temp_directory_path() / "fpn_test_a.fpnd";
  const fs::path b = fs::temp_directory_path() / "fpn_test_b.fpnd";
  save_dataset(a, generate_dataset(6, desk_spec(), op, 20, "train", 1));
  save_dataset(b, generate_dataset(6, desk_spec(), op, 20, "train", 1));
  CHECK(bytes(a) == bytes(b));

  const Dataset ds = load_dataset(a);
  const Dataset ref = generate_dataset(6, desk_spec(), op, 20, "train", 1);
  CHECK(ds.size() == 20);
  CHECK((ds.h - ref.h.cast<float>().cast<double>()).norm() == 0.0);
  CHECK(ds.manifest.at("split") == "train");
  CHECK_NOTHROW(check_operator(ds, op));
  CHECK_THROWS(check_operator(ds, make_operator(2, desk(), PilotConfig{})));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("slices") {
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  const Dataset ds = generate_dataset(7, desk_spec(), op, 10);
  const Dataset s = ds.slice(3, 4);
  CHECK(s.size() == 4);
  CHECK((s.y - ds.y.middleCols(3, 4)).norm() == 0.0);
  CHECK(s.snr_db[0] == ds.snr_db[3]);
  CHECK_THROWS_AS(ds.slice(8, 4), InvalidInput);
}

TEST_CASE("miscalibrated gains") {
  const CVec g = miscalibrated_gains(1, 64, 0.2, 0.2);
  REQUIRE(g.size() == 64);
  int perturbed = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g(i) != cplx(1.0, 0.0)) ++perturbed;
  CHECK(perturbed == 13);
  CHECK(miscalibrated_gains(1, 64, 0.2, 0.2) == g);

  // Unit gains leave the samples unchanged.
  const MeasurementOperator op = make_operator(1, desk(), PilotConfig{});
  SampleSpec spec = desk_spec();
  spec.antenna_gains = CVec::Ones(64);
  CHECK((draw_sample(2, 0, spec, op).y - draw_sample(2, 0, desk_spec(), op).y).norm() == 0.0);
}

TEST_CASE("missing dataset files are reported") {
  CHECK_THROWS_WITH_AS(load_dataset("/nonexistent/x.fpnd"), doctest::Contains("x.fpnd"),
                       std::runtime_error);
}
