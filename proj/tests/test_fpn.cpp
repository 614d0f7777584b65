#include <doctest.h>

#include <cmath>

#include "fpn/fpn.hpp"

using namespace fpn;

namespace {

ArrayGeometry tiny_geometry() { return ArrayGeometry::from_wavelengths(1, 4, 300e9, 8.0); }

PilotConfig tiny_pilot() {
  PilotConfig p;
  p.num_slots = 2;
  return p;
}

Vec random_vec(std::uint64_t seed, Eigen::Index n, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Mat random_mat(std::uint64_t seed, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = random_vec(seed + 97 * j, r);
  return m;
}

NleParameters random_params(std::uint64_t seed, const NleShape& shape, double sd = 0.3) {
  NleParameters p = init_params(seed, shape);
  Rng rng(seed + 1);
  std::normal_distribution<double> n(0.0, sd);
  for (double& v : p.values) v += n(rng);
  return p;
}

NleShape tiny_shape(double skip) {
  NleShape s = NleShape::for_geometry(tiny_geometry(), 4, 1, skip);
  return s;
}

}  // namespace

TEST_CASE("linear estimator") {
  const MeasurementOperator op = make_operator(1, tiny_geometry(), tiny_pilot());
  const Vec h = random_vec(1, op.channel_dim());
  const Vec y = op.M * h;
  CHECK((le_apply(op, h, y) - h).norm() == 0.0);
  const Vec y2 = random_vec(2, op.measurement_dim());
  CHECK((le_apply(op, Vec::Zero(op.channel_dim()), y2) - op.W * y2).norm() == 0.0);
  const Vec h1 = random_vec(3, op.channel_dim()), h2 = random_vec(4, op.channel_dim());
  const Mat R = Mat::Identity(op.channel_dim(), op.channel_dim()) - op.W * op.M;
  CHECK((le_apply(op, h1, y2) - le_apply(op, h2, y2) - R * (h1 - h2)).norm() < 1e-12);
  Mat hb(op.channel_dim(), 2), yb(op.measurement_dim(), 2);
  hb << h1, h2;
  yb << y, y2;
  const Mat ub = le_apply_batch(op, hb, yb);
  CHECK((ub.col(0) - le_apply(op, h1, y)).norm() < 1e-12);
  CHECK((ub.col(1) - le_apply(op, h2, y2)).norm() < 1e-12);
}

TEST_CASE("contraction map with an initialized NLE") {
  const MeasurementOperator op = make_operator(2, tiny_geometry(), tiny_pilot());
  const Vec h = random_vec(5, op.channel_dim()), y = random_vec(6, op.measurement_dim());
  const NleParameters ident = init_params(1, tiny_shape(1.0));
  CHECK((contraction_apply(ident, op, h, y) - le_apply(op, h, y)).norm() == 0.0);
  const NleParameters half = init_params(1, tiny_shape(0.5));
  CHECK((contraction_apply(half, op, h, y) - 0.5 * le_apply(op, h, y)).norm() == 0.0);
  const NleParameters p = random_params(3, tiny_shape(0.5));
  CHECK((contraction_apply(p, op, h, y) - contraction_apply(p, op, h, y)).norm() == 0.0);
}

TEST_CASE("Picard iteration of an affine contraction") {
  const Vec b = random_vec(7, 6);
  const auto f = [&b](const Vec& h) -> Vec { return 0.5 * h + b; };
  SolveOptions opts{1e-10, 200, false};
  const FixedPointResult r = fixed_point_iterate(f, Vec::Zero(6), opts);
  CHECK(r.converged);
  CHECK((r.h_star - 2.0 * b).norm() < 1e-9);
  // Ratios while the residual is well above rounding.
  for (std::size_t t = 1; t < r.residual_trace.size() && r.residual_trace[t] > 1e-3; ++t)
    CHECK(std::abs(r.residual_trace[t] / r.residual_trace[t - 1] - 0.5) <= 1e-12);

  opts.epsilon = 10.0 * b.norm();
  const FixedPointResult one = fixed_point_iterate(f, Vec::Zero(6), opts);
  CHECK(one.iterations == 1);
  CHECK(one.converged);
  CHECK(one.h_star.norm() == 0.0);

  CHECK_THROWS_AS(fixed_point_iterate(f, Vec::Zero(6), {0.0, 10, false}), InvalidInput);
  CHECK_THROWS_AS(fixed_point_iterate(f, Vec::Zero(6), {0.1, 0, false}), InvalidInput);
}

TEST_CASE("batched solve matches single solves") {
  const MeasurementOperator op = make_operator(3, tiny_geometry(), tiny_pilot());
  const NleParameters p = random_params(4, tiny_shape(0.5), 0.1);
  const Mat y = random_mat(8, op.measurement_dim(), 5);
  const SolveOptions opts{1e-3, 30, true};
  const auto batch = fixed_point_solve_batch(p, op, y, opts);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const auto single = fixed_point_solve(p, op, y.col(j), opts);
    const auto& b = batch[static_cast<std::size_t>(j)];
    CHECK(single.iterations == b.iterations);
    CHECK(single.converged == b.converged);
    CHECK((single.h_star - b.h_star).norm() < 1e-10);
    CHECK(single.iterates.size() == b.iterates.size());
  }
}

TEST_CASE("random-probe Lipschitz estimate") {
  const NleShape ident = tiny_shape(1.0);
  const Mat pts = random_mat(9, ident.dim(), 8);
  Rng rng(1);
  CHECK(lipschitz_estimate(init_params(1, ident), pts, 1e-2, rng).lipschitz_estimate ==
        doctest::Approx(1.0).epsilon(1e-10));
  Rng rng2(2);
  const double l07 =
      lipschitz_estimate(init_params(1, tiny_shape(0.7)), pts, 1e-2, rng2).lipschitz_estimate;
  CHECK(std::abs(l07 - 0.7) < 0.01);
  const Mat A = 0.7 * Mat::Identity(5, 5);
  Rng rng3(3);
  CHECK(lipschitz_estimate_map([&A](const Mat& x) -> Mat { return A * x; }, random_mat(1, 5, 4),
                               0.1, rng3)
            .lipschitz_estimate == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("spectral Lipschitz estimate") {
  const NleShape ident = tiny_shape(1.0);
  const Mat pts = random_mat(10, ident.dim(), 4);
  Rng rng(4);
  CHECK(spectral_lipschitz_estimate(init_params(1, ident), pts, 10, rng).lipschitz_estimate ==
        doctest::Approx(1.0).epsilon(1e-6));
  Rng rng2(5);
  CHECK(spectral_lipschitz_estimate(init_params(1, tiny_shape(0.7)), pts, 10, rng2)
            .lipschitz_estimate == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("probe estimate is stable across perturbation scales") {
  const NleParameters p = random_params(6, tiny_shape(0.5), 0.1);
  const Mat pts = random_mat(11, p.shape.dim(), 16);
  std::vector<double> est;
  for (double rel : {1e-3, 1e-2, 1e-1}) {
    Rng rng(7);
    est.push_back(lipschitz_estimate(p, pts, probe_scale(pts, rel), rng).lipschitz_estimate);
  }
  for (double e : est) CHECK(std::abs(e / est[0] - 1.0) < 0.1);
}

TEST_CASE("safeguard normalization") {
  const NleParameters p = random_params(8, tiny_shape(0.5));
  const NleParameters same = safeguard_normalize(p, 0.9);
  CHECK(same.values == p.values);
  const NleParameters scaled = safeguard_normalize(p, 2.0);
  for (const auto& t : parameter_layout(p.shape)) {
    const auto a = p.tensor(t.name), b = scaled.tensor(t.name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (t.name == "head2.weight")
        CHECK(b[i] == doctest::Approx(a[i] * 0.5 * (1.0 - 1e-3)));
      else
        CHECK(b[i] == a[i]);
    }
  }
}

TEST_CASE("contraction scale") {
  CHECK(contraction_scale([](double s) { return 1.5 * s; }, 0.8) == 1.0);
  const double s = contraction_scale([](double x) { return 1.5 * x; }, 1.5);
  CHECK(1.5 * s <= 1.0 + 1e-3);
  CHECK(1.5 * s >= 0.99);
  // Affine map is solved by secant steps.
  int calls = 0;
  const auto g = [&calls](double x) { return ++calls, 0.6 + 0.9 * x; };
  const double t = contraction_scale(g, 1.5);
  CHECK(g(t) <= 1.0);
  CHECK(g(t) > 0.999);
  CHECK(calls <= 4);
  // A jump defeats the secant and falls back to bisection.
  const auto h = [](double x) { return x > 0.3 ? 2.0 : 0.9; };
  const double u = contraction_scale(h, 2.0);
  CHECK(h(u) <= 1.0);
  CHECK(u > 0.29);
}

TEST_CASE("enforced contraction bounds local ratios") {
  const MeasurementOperator op = make_operator(4, tiny_geometry(), tiny_pilot());
  NleParameters p = random_params(9, tiny_shape(0.5), 0.5);
  const Mat y = random_mat(12, op.measurement_dim(), 4);
  const auto solved = fixed_point_solve_batch(p, op, y, {1e-6, 10, false});
  Mat u(op.channel_dim(), 4);
  for (int j = 0; j < 4; ++j) u.col(j) = le_apply(op, solved[j].h_star, y.col(j));
  const auto estimate = [&u](const NleParameters& q) {
    Rng rng(3);
    return spectral_lipschitz_estimate(q, u, 40, rng).lipschitz_estimate;
  };
  const double L = enforce_contraction(p, estimate, 1.0);
  CHECK(L <= 1.0);
  CHECK(estimate(p) == L);
  // Nearby pairs through the full map f = NLE o LE.
  Rng rng(13);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const int j = k % 4;
    const Vec h1 = solved[j].h_star;
    Vec delta(op.channel_dim());
    for (auto& x : delta) x = 1e-6 * d(rng);
    const Vec yj = y.col(j);
    const double ratio =
        (contraction_apply(p, op, h1 + delta, yj) - contraction_apply(p, op, h1, yj)).norm() /
        delta.norm();
    CHECK(ratio <= L * (1.0 + 1e-3));
  }
}
