#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fpn/checkpoint.hpp"

using namespace fpn;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("fpn_test_" + name);
}

}  // namespace

TEST_CASE("checkpoint round trip at float32 precision") {
  NleShape shape{4, 4, 8, 2};
  shape.skip = 0.3;
  NleParameters p = init_params(5, shape);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 1.0);
  for (double& v : p.values) v += d(rng);
  const fs::path path = temp_path("ckpt.bin");
  save_checkpoint(path, p);
  const NleParameters q = load_checkpoint(path);
  CHECK(q.shape == p.shape);
  REQUIRE(q.values.size() == p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i)
    CHECK(q.values[i] == static_cast<double>(static_cast<float>(p.values[i])));

  // A second round trip is exact.
  save_checkpoint(path, q);
  CHECK(load_checkpoint(path).values == q.values);
  fs::remove(path);
}

TEST_CASE("missing and corrupt checkpoints are rejected") {
  const fs::path missing = temp_path("does_not_exist.bin");
  fs::remove(missing);
  CHECK_THROWS_WITH_AS(load_checkpoint(missing), doctest::Contains("does_not_exist"),
                       std::runtime_error);
  const fs::path bad = temp_path("bad.bin");
  std::ofstream(bad, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(bad), InvalidInput);
  fs::remove(bad);
}

TEST_CASE("truncated checkpoints are rejected") {
  const NleParameters p = init_params(1, NleShape{1, 2, 4, 1});
  const fs::path path = temp_path("trunc.bin");
  save_checkpoint(path, p);
  fs::resize_file(path, fs::file_size(path) - 8);
  CHECK_THROWS(load_checkpoint(path));
  fs::remove(path);
}
