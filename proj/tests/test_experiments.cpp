#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fpn/experiments.hpp"

using namespace fpn;

namespace {

RunConfig small_config() {
  RunConfig c = desk_config();
  c.baselines.max_iters = 50;
  return c;
}

std::string csv_string(const std::vector<NmseRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

}  // namespace

TEST_CASE("NMSE table") {
  const RunConfig cfg = small_config();
  const MeasurementOperator op = config_operator(cfg);
  auto methods = standard_estimators(cfg, op, nullptr);
  methods.push_back({"oracle", [](const Vec&, const Vec& h) { return Estimate{h, 0}; }});
  const auto rows = eval_nmse(cfg, op, methods, {0.0, 10.0}, 5, true);
  std::set<double> ls_snr;
  for (const auto& r : rows) {
    if (r.method == "LS") ls_snr.insert(r.snr_db);
    if (r.method == "oracle") CHECK(r.nmse_db == kNmseFloorDb);
    CHECK(r.wall_time == 0.0);
    CHECK(std::isfinite(r.nmse_db));
  }
  CHECK(ls_snr == std::set<double>{0.0, 10.0});
  CHECK(rows.size() == 2 * methods.size());
  const std::string a = csv_string(rows);
  CHECK(a.rfind("snr_db,method,nmse_db,mean_iterations,wall_time\n", 0) == 0);
  CHECK(a == csv_string(eval_nmse(cfg, op, methods, {0.0, 10.0}, 5, true)));
  CHECK_THROWS_AS(eval_nmse(cfg, op, methods, {}, 5), InvalidInput);
}

TEST_CASE("FPN-OAMP appears when a model is given") {
  const RunConfig cfg = small_config();
  const MeasurementOperator op = config_operator(cfg);
  const NleParameters theta =
      init_params(1, NleShape::for_geometry(cfg.geometry, 8, 1, cfg.train.skip));
  const auto methods = standard_estimators(cfg, op, &theta);
  CHECK(methods.back().name == "FPN-OAMP");
  CHECK(methods.size() == 5);
}

TEST_CASE("convergence trace") {
  const RunConfig cfg = small_config();
  const MeasurementOperator op = config_operator(cfg);
  const NleParameters theta =
      init_params(1, NleShape::for_geometry(cfg.geometry, 8, 1, cfg.train.skip));
  const auto rows = convergence_trace(cfg, op, theta, 15.0, 4, 6);
  CHECK(rows.size() == 18);
  double last_obj = INFINITY;
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.nmse_db));
    if (r.method == "FPN-OAMP") CHECK(r.residual > 0.0);
    if (r.method == "FISTA") {
      CHECK(r.objective <= last_obj + 1e-12);
      last_obj = r.objective;
    }
  }
}

TEST_CASE("far-field curve") {
  const auto rows = farfield_error_curve({{"paper", paper_config().geometry}},
                                         log_grid(0.1, 10.0, 21));
  REQUIRE(rows.size() == 21);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.error_db));
    CHECK(r.rayleigh == doctest::Approx(20.16).epsilon(1e-3));
  }
  CHECK(rows.front().error_db - rows.back().error_db >= 20.0);
  CHECK(rows.front().r_over_rayleigh == doctest::Approx(0.1));
  CHECK(rows.back().r_over_rayleigh == doctest::Approx(10.0));
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 5), InvalidInput);
}

TEST_CASE("shift suite") {
  const RunConfig cfg = desk_config();
  const auto shifts = standard_shifts(cfg);
  std::set<std::string> ids;
  for (const auto& s : shifts) {
    ids.insert(s.id);
    if (s.id == "rho_70") CHECK(s.target.pilot.num_slots == 11);
    if (s.id == "rho_30") CHECK(s.target.pilot.num_slots == 5);
    if (s.id == "rho_10") CHECK(s.target.pilot.num_slots == 2);
    CHECK(s.self_adapt == (s.family == "measurement" && !s.fresh_operators));
  }
  for (const char* id : {"snr_-5dB", "snr_25dB", "impulsive_alpha1.8", "los_blockage", "L3", "L7",
                         "near_only", "far_only", "d_sub_half", "d_a_0.4lambda",
                         "gain_miscalibration", "rho_70", "rho_30", "rho_10",
                         "infinite_resolution", "fresh_operators"})
    CHECK(ids.count(id) == 1);
}

TEST_CASE("shift rows") {
  const RunConfig cfg = desk_config();
  const MeasurementOperator op = config_operator(cfg);
  const NleParameters theta =
      init_params(1, NleShape::for_geometry(cfg.geometry, 8, 1, cfg.train.skip));
  for (OodShift s : standard_shifts(cfg)) {
    if (s.id == "fresh_operators") {
      s.operator_draws = 2;
      const OodRow r = run_shift(cfg, op, theta, s, 4, {});
      CHECK(r.ood_draws_db.size() == 2);
      CHECK(r.ood_nmse_db == doctest::Approx(0.5 * (r.ood_draws_db[0] + r.ood_draws_db[1])));
    }
    if (s.id == "L3") {
      const OodRow r = run_shift(cfg, op, theta, s, 4, {});
      CHECK(r.in_dist_nmse_db == r.ood_nmse_db);
      CHECK_FALSE(r.selfadapt_nmse_db.has_value());
    }
    if (s.id == "rho_30") {
      const OodRow r = run_shift(cfg, op, theta, s, 3, {});
      CHECK(r.selfadapt_nmse_db.has_value());
    }
  }
}

TEST_CASE("single subcarrier reduces to the narrowband pipeline") {
  RunConfig cfg = desk_config();
  const MeasurementOperator op = config_operator(cfg);
  SampleSpec a = cfg.sample_spec(), b = cfg.sample_spec();
  b.frequency = cfg.geometry.carrier;
  for (std::uint64_t i = 0; i < 5; ++i)
    CHECK((draw_sample(3, i, a, op).h - draw_sample(3, i, b, op).h).norm() <
          1e-12 * draw_sample(3, i, a, op).h.norm());

  cfg.wideband.num_subcarriers = 1;
  const NleParameters theta =
      init_params(1, NleShape::for_geometry(cfg.geometry, 8, 1, cfg.train.skip));
  const auto rows = wideband_eval(cfg, op, theta, 10.0, 4);
  REQUIRE(rows.size() == 2);
  SampleSpec spec = cfg.sample_spec();
  spec.snr_min_db = spec.snr_max_db = 10.0;
  const Dataset ds = generate_dataset(cfg.split_seed("wideband"), spec, op, 4);
  CHECK(rows[0].nmse_db == fpn_nmse_db(theta, op, ds, cfg.inference));
  CHECK(rows[0].f_k == cfg.geometry.carrier);
}

TEST_CASE("wideband grid of the reference config") {
  const RunConfig cfg = paper_config();
  const auto f = cfg.wideband.frequencies(cfg.geometry.carrier);
  CHECK(f.size() == 32);
  CHECK(f.back() - f.front() == doctest::Approx(15e9 * 31.0 / 32.0));
}

TEST_CASE("linear fit") {
  CHECK(linear_fit_r2({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(1.0));
  CHECK(linear_fit_r2({0, 1, 2, 3}, {0, 1, 0, 1}) < 0.5);
  CHECK_THROWS_AS(linear_fit_r2({1}, {1}), InvalidInput);
}
