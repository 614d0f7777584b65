#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fpn/config.hpp"

using namespace fpn;
namespace fs = std::filesystem;

TEST_CASE("default configs") {
  const RunConfig desk = desk_config();
  CHECK(desk.n_train == 8000);
  CHECK(desk.n_val == 500);
  CHECK(desk.n_test == 500);
  CHECK(desk.geometry.num_subarrays == 4);
  CHECK(desk.geometry.antennas_per_subarray == 16);
  CHECK(desk.pilot.num_slots == 8);
  CHECK(desk.pilot.undersampling_ratio(desk.geometry) == 0.5);
  CHECK(desk.train.width == 32);
  CHECK(desk.train.blocks == 3);
  CHECK_NOTHROW(desk.validate());

  const RunConfig paper = paper_config();
  CHECK(paper.n_train == 80000);
  CHECK(paper.n_val == 5000);
  CHECK(paper.n_test == 5000);
  CHECK(paper.train.epochs == 100);
  CHECK(paper.train.batch_size == 128);
  CHECK(paper.train.learning_rate == 1e-3);
  CHECK(paper.pilot.num_slots == 128);
  CHECK(paper.wideband.num_subcarriers == 32);
  CHECK(paper.wideband.bandwidth == 15e9);
  CHECK_NOTHROW(paper.validate());
}

TEST_CASE("JSON round trip") {
  for (const RunConfig& c : {desk_config(), paper_config()}) {
    const RunConfig back = from_json(to_json(c), c.name == "paper" ? paper_config() : desk_config());
    CHECK(to_json(back) == to_json(c));
    CHECK(config_digest(back) == config_digest(c));
  }
  RunConfig changed = desk_config();
  changed.seed = 2;
  CHECK(config_digest(changed) != config_digest(desk_config()));
}

TEST_CASE("partial JSON overrides the base") {
  const auto j = nlohmann::json::parse(R"({"seed": 9, "pilot": {"Q": 5}, "training": {"epochs": 3}})");
  const RunConfig c = from_json(j);
  CHECK(c.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.pilot.num_slots == 5);
  CHECK(c.train.epochs == 3);
  CHECK(c.geometry.antennas_per_subarray == 16);
}

TEST_CASE("invalid JSON is rejected") {
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"bogus": 1})")), InvalidInput);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"pilot": {"Q": 1, "extra": 2}})")),
                  InvalidInput);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"snr_grid": []})")), InvalidInput);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"pilot": {"Q": 40}})")), InvalidInput);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"training": {"safeguard": "never"}})")),
                  InvalidInput);
}

TEST_CASE("config files") {
  const fs::path p = fs::temp_directory_path() / "fpn_test_config.json";
  save_config(p, desk_config());
  CHECK(to_json(load_config(p)) == to_json(desk_config()));
  std::ofstream(p) << R"({"name": "paper", "seed": 4})";
  const RunConfig c = load_config(p);
  CHECK(c.pilot.num_slots == 128);
  CHECK(c.seed == 4);
  fs::remove(p);
  CHECK_THROWS(load_config(p));
}

TEST_CASE("split seeds are distinct") {
  const RunConfig c = desk_config();
  CHECK(c.split_seed("train") != c.split_seed("val"));
  CHECK(c.split_seed("train") == desk_config().split_seed("train"));
  RunConfig other = c;
  other.seed = 2;
  CHECK(other.split_seed("train") != c.split_seed("train"));
}

TEST_CASE("wideband grid") {
  WidebandConfig w;
  w.num_subcarriers = 1;
  CHECK(w.frequencies(300e9) == std::vector<double>{300e9});
  w.num_subcarriers = 32;
  w.bandwidth = 15e9;
  const auto f = w.frequencies(300e9);
  REQUIRE(f.size() == 32);
  for (std::size_t k = 0; k < 16; ++k) CHECK(f[k] + f[31 - k] == doctest::Approx(600e9));
  CHECK(f[1] - f[0] == doctest::Approx(15e9 / 32));
  w.bandwidth = 0.0;
  CHECK_THROWS_AS(w.validate(), InvalidInput);
}
