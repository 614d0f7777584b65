#include <doctest.h>

#include <random>

#include "fpn/nle.hpp"

using namespace fpn;

namespace {

NleShape tiny_shape() { return {1, 2, 4, 1}; }

// Random weights everywhere, including the zero-initialized head.
NleParameters random_params(std::uint64_t seed, const NleShape& shape) {
  NleParameters p = init_params(seed, shape);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n(0.0, 0.5);
  for (double& v : p.values) v += n(rng);
  return p;
}

Vec random_vec(std::uint64_t seed, Eigen::Index n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b, std::size_t first,
               std::size_t count) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = first; i < first + count; ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max({den, std::abs(a[i]), std::abs(b[i])});
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace

TEST_CASE("parameter count matches the hand count") {
  // lift 64*8*9+64; block 2*(64*64*9+64)+4*64; head 64*64+64 + 8*64+8
  const std::size_t lift = 64 * 8 * 9 + 64;
  const std::size_t block = 2 * (64 * 64 * 9 + 64) + 4 * 64;
  const std::size_t head = 64 * 64 + 64 + 8 * 64 + 8;
  const NleShape paper{4, 16, 64, 3};
  CHECK(parameter_count(paper) == lift + 3 * block + head);
  CHECK(parameter_count(paper) == 231688);
  CHECK(parameter_count(tiny_shape()) == 418);
}

TEST_CASE("initialized network is the skip map") {
  for (double skip : {0.5, 1.0}) {
    NleShape shape{4, 4, 32, 3};
    shape.skip = skip;
    const NleParameters p = init_params(3, shape);
    const Vec u = random_vec(4, shape.dim());
    CHECK((nle_forward(p, u) - skip * u).norm() == 0.0);
    const Vec up = random_vec(5, shape.dim());
    const GradientBundle g = nle_backward(p, u, up);
    CHECK((g.input - skip * up).norm() == 0.0);
  }
}

TEST_CASE("same seed gives identical parameters") {
  const NleShape shape{4, 4, 32, 3};
  CHECK(init_params(9, shape).values == init_params(9, shape).values);
  CHECK(init_params(9, shape).values != init_params(10, shape).values);
}

TEST_CASE("length mismatch is rejected") {
  const NleParameters p = init_params(1, tiny_shape());
  CHECK_THROWS_AS(nle_forward(p, Vec::Zero(7)), InvalidInput);
  CHECK_THROWS_AS(nle_backward(p, Vec::Zero(8), Vec::Zero(7)), InvalidInput);
}

TEST_CASE("zero upstream gives zero gradients") {
  const NleParameters p = random_params(2, tiny_shape());
  const GradientBundle g = nle_backward(p, random_vec(1, 8), Vec::Zero(8));
  for (double v : g.params) CHECK(v == 0.0);
  CHECK(g.input.norm() == 0.0);
}

TEST_CASE("backward matches central differences on the tiny instance") {
  const NleShape shape = tiny_shape();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    NleParameters p = random_params(100 + seed, shape);
    const Vec u = random_vec(200 + seed, shape.dim());
    const Vec w = random_vec(300 + seed, shape.dim());
    const GradientBundle g = nle_backward(p, u, w);
    auto objective = [&](const NleParameters& q, const Vec& x) { return w.dot(nle_forward(q, x)); };

    std::vector<double> fd(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(p.values[i]));
      const double v0 = p.values[i];
      p.values[i] = v0 + h;
      const double up = objective(p, u);
      p.values[i] = v0 - h;
      const double dn = objective(p, u);
      p.values[i] = v0;
      fd[i] = (up - dn) / (2 * h);
    }
    for (const auto& t : parameter_layout(shape)) {
      INFO("seed " << seed << " tensor " << t.name);
      CHECK(rel_err(g.params, fd, t.offset, t.size) < 1e-5);
    }

    std::vector<double> gin(g.input.data(), g.input.data() + g.input.size()), fdin(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      Vec a = u, b = u;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      fdin[static_cast<std::size_t>(i)] = (objective(p, a) - objective(p, b)) / 2e-6;
    }
    CHECK(rel_err(gin, fdin, 0, gin.size()) < 1e-5);
  }
}

TEST_CASE("batched passes agree with single-sample passes") {
  const NleShape shape{2, 3, 5, 2};
  const NleParameters p = random_params(7, shape);
  Mat u(shape.dim(), 3), up(shape.dim(), 3);
  for (int j = 0; j < 3; ++j) {
    u.col(j) = random_vec(10 + j, shape.dim());
    up.col(j) = random_vec(20 + j, shape.dim());
  }
  NleTape tape;
  const Mat out = nle_forward_batch(p, u, &tape);
  const GradientBundle gb = nle_backward_batch(p, tape, up);
  std::vector<double> sum(p.values.size(), 0.0);
  for (int j = 0; j < 3; ++j) {
    CHECK((out.col(j) - nle_forward(p, u.col(j))).norm() < 1e-12);
    const GradientBundle g = nle_backward(p, u.col(j), up.col(j));
    CHECK((gb.input.col(j) - g.input).norm() < 1e-12);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g.params[i];
  }
  CHECK(rel_err(gb.params, sum, 0, sum.size()) < 1e-12);
}

TEST_CASE("reshape keeps one map per subarray and part") {
  const NleShape shape{2, 2, 4, 1};
  Vec u(shape.dim());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = static_cast<double>(i);
  const Mat maps = to_feature_maps(shape, u);
  REQUIRE(maps.rows() == 4);
  REQUIRE(maps.cols() == 4);
  // Channel c holds entries c*P .. c*P+P-1.
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < 4; ++p) CHECK(maps(c, p) == u(c * 4 + p));
  CHECK((from_feature_maps(shape, maps) - u).norm() == 0.0);

  // Swapping the two subarrays swaps their maps.
  Vec swapped = u;
  swapped.segment(0, 4) = u.segment(4, 4);
  swapped.segment(4, 4) = u.segment(0, 4);
  swapped.segment(8, 4) = u.segment(12, 4);
  swapped.segment(12, 4) = u.segment(8, 4);
  const Mat m2 = to_feature_maps(shape, swapped);
  CHECK((m2.row(0) - maps.row(1)).norm() == 0.0);
  CHECK((m2.row(3) - maps.row(2)).norm() == 0.0);
}
