#include "fpn/fpn.hpp"

#include <cmath>

namespace fpn {

Vec le_apply(const MeasurementOperator& op, const Vec& h, const Vec& y) {
  require(h.size() == op.channel_dim(), "le_apply: channel length mismatch");
  require(y.size() == op.measurement_dim(), "le_apply: measurement length mismatch");
  return h + op.W * (y - op.M * h);
}

Mat le_apply_batch(const MeasurementOperator& op, const Mat& h, const Mat& y) {
  require(h.rows() == op.channel_dim() && y.rows() == op.measurement_dim() && h.cols() == y.cols(),
          "le_apply: dimension mismatch");
  Mat r = y;
  r.noalias() -= op.M * h;
  Mat u = h;
  u.noalias() += op.W * r;
  return u;
}

Vec contraction_apply(const NleParameters& theta, const MeasurementOperator& op, const Vec& h,
                      const Vec& y) {
  return nle_forward(theta, le_apply(op, h, y));
}

Mat contraction_apply_batch(const NleParameters& theta, const MeasurementOperator& op,
                            const Mat& h, const Mat& y) {
  return nle_forward_batch(theta, le_apply_batch(op, h, y));
}

FixedPointResult fixed_point_iterate(const std::function<Vec(const Vec&)>& f, const Vec& h0,
                                     const SolveOptions& opts) {
  require(opts.epsilon > 0.0, "fixed_point: epsilon must be positive");
  require(opts.max_iters >= 1, "fixed_point: max_iters must be >= 1");
  FixedPointResult res;
  Vec h = h0;
  if (opts.keep_iterates) res.iterates.push_back(h);
  for (int t = 0; t < opts.max_iters; ++t) {
    Vec next = f(h);
    const double r = (h - next).norm();
    res.residual_trace.push_back(r);
    ++res.iterations;
    if (r <= opts.epsilon) {
      res.converged = true;
      break;
    }
    h = std::move(next);
    if (opts.keep_iterates) res.iterates.push_back(h);
  }
  res.h_star = h;
  return res;
}

FixedPointResult fixed_point_solve(const NleParameters& theta, const MeasurementOperator& op,
                                   const Vec& y, const SolveOptions& opts) {
  return fixed_point_iterate([&](const Vec& h) { return contraction_apply(theta, op, h, y); },
                             Vec::Zero(op.channel_dim()), opts);
}

std::vector<FixedPointResult> fixed_point_solve_batch(const NleParameters& theta,
                                                      const MeasurementOperator& op, const Mat& y,
                                                      const SolveOptions& opts, const Mat* h0) {
  require(opts.epsilon > 0.0, "fixed_point: epsilon must be positive");
  require(opts.max_iters >= 1, "fixed_point: max_iters must be >= 1");
  require(y.rows() == op.measurement_dim(), "fixed_point: measurement length mismatch");
  const Eigen::Index n = y.cols();
  Mat h = h0 ? *h0 : Mat::Zero(op.channel_dim(), n);
  require(h.rows() == op.channel_dim() && h.cols() == n, "fixed_point: h0 shape mismatch");

  std::vector<FixedPointResult> out(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    active[j] = j;
    if (opts.keep_iterates) out[j].iterates.push_back(h.col(j));
  }
  for (int t = 0; t < opts.max_iters && !active.empty(); ++t) {
    const auto na = static_cast<Eigen::Index>(active.size());
    Mat ha(h.rows(), na), ya(y.rows(), na);
    for (Eigen::Index k = 0; k < na; ++k) {
      ha.col(k) = h.col(active[k]);
      ya.col(k) = y.col(active[k]);
    }
    const Mat next = contraction_apply_batch(theta, op, ha, ya);
    std::vector<Eigen::Index> still;
    for (Eigen::Index k = 0; k < na; ++k) {
      auto& res = out[active[k]];
      const double r = (ha.col(k) - next.col(k)).norm();
      res.residual_trace.push_back(r);
      ++res.iterations;
      if (r <= opts.epsilon) {
        res.converged = true;
        continue;
      }
      h.col(active[k]) = next.col(k);
      if (opts.keep_iterates) res.iterates.push_back(next.col(k));
      still.push_back(active[k]);
    }
    active.swap(still);
  }
  for (Eigen::Index j = 0; j < n; ++j) out[j].h_star = h.col(j);
  return out;
}

ContractionDiagnostics lipschitz_estimate_map(const std::function<Mat(const Mat&)>& g,
                                              const Mat& points, double scale, Rng& rng) {
  require(points.cols() > 0, "lipschitz_estimate: empty batch");
  require(scale > 0.0, "lipschitz_estimate: perturbation scale must be positive");
  std::normal_distribution<double> gauss(0.0, scale);
  Mat delta(points.rows(), points.cols());
  for (Eigen::Index j = 0; j < delta.cols(); ++j)
    for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, j) = gauss(rng);
  const Mat base = g(points);
  const Mat moved = g(points + delta);
  const double num = (moved - base).colwise().norm().sum();
  const double den = delta.colwise().norm().sum();
  return {num / den, static_cast<int>(points.cols()), scale};
}

ContractionDiagnostics lipschitz_estimate(const NleParameters& theta, const Mat& fixed_points,
                                          double scale, Rng& rng) {
  return lipschitz_estimate_map([&](const Mat& x) { return nle_forward_batch(theta, x); },
                                fixed_points, scale, rng);
}

double probe_scale(const Mat& points, double relative) {
  const double rms = std::sqrt(points.squaredNorm() / static_cast<double>(points.size()));
  return relative * (rms > 0.0 ? rms : 1.0);
}

namespace {

NleParameters scale_head(const NleParameters& theta, double factor) {
  NleParameters out = theta;
  for (double& w : out.tensor("head2.weight")) w *= factor;
  return out;
}

}  // namespace

NleParameters safeguard_normalize(const NleParameters& theta, double L_hat) {
  if (!(L_hat > 1.0)) return theta;
  return scale_head(theta, (1.0 / L_hat) * (1.0 - 1e-3));
}

double contraction_scale(const std::function<double(double)>& lipschitz_at, double L_hat,
                         double target) {
  if (!(L_hat > target)) return 1.0;
  double s = (target / L_hat) * (1.0 - 1e-3);
  double L = lipschitz_at(s);
  if (L <= target) return s;
  // Secant steps on L(s), which is close to affine once the skip term dominates.
  double s_prev = 1.0, L_prev = L_hat, hi = s;
  for (int k = 0; k < 4; ++k) {
    const double slope = (L_prev - L) / (s_prev - s);
    if (!(slope > 0.0)) break;
    const double next = s + (target * (1.0 - 1e-4) - L) / slope;
    if (!(next > 0.0 && next < hi)) break;
    s_prev = s, L_prev = L, s = next;
    L = lipschitz_at(s);
    if (L <= target) return s;
    hi = s;
  }
  double lo = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double mid = 0.5 * (lo + hi);
    (lipschitz_at(mid) <= target ? lo : hi) = mid;
  }
  return lo;
}

double enforce_contraction(NleParameters& theta,
                           const std::function<double(const NleParameters&)>& estimate,
                           double target) {
  const double L = estimate(theta);
  if (L <= target) return L;
  const double s =
      contraction_scale([&](double f) { return estimate(scale_head(theta, f)); }, L, target);
  theta = scale_head(theta, s);
  return estimate(theta);
}

double enforce_contraction(NleParameters& theta, const Mat& fixed_points, double scale,
                           std::uint64_t seed) {
  return enforce_contraction(
      theta,
      [&](const NleParameters& p) {
        Rng rng = make_stream(seed, 0, 0x5afe);
        return lipschitz_estimate(p, fixed_points, scale, rng).lipschitz_estimate;
      },
      1.0);
}

ContractionDiagnostics spectral_lipschitz_estimate(const NleParameters& theta, const Mat& points,
                                                   int iterations, Rng& rng) {
  require(points.cols() > 0, "spectral_lipschitz_estimate: empty batch");
  require(iterations >= 1, "spectral_lipschitz_estimate: iterations must be >= 1");
  const Eigen::Index n = points.cols();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat v(points.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = gauss(rng);
  v.colwise().normalize();

  NleTape tape;
  const Mat base = nle_forward_batch(theta, points, &tape);
  Vec step(n);
  for (Eigen::Index j = 0; j < n; ++j) step(j) = 1e-6 * std::max(1.0, points.col(j).norm());
  auto jvp = [&](const Mat& dir) {
    return Mat((nle_forward_batch(theta, points + dir * step.asDiagonal()) - base) *
               step.cwiseInverse().asDiagonal());
  };
  Vec sigma = Vec::Zero(n);
  for (int k = 0; k < iterations; ++k) {
    const Mat w = jvp(v);
    sigma = w.colwise().norm().transpose();
    v = nle_backward_batch(theta, tape, w).input;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double nv = v.col(j).norm();
      if (nv > 0.0) v.col(j) /= nv;
    }
  }
  sigma = sigma.cwiseMax(jvp(v).colwise().norm().transpose());
  return {sigma.maxCoeff(), static_cast<int>(n), step.maxCoeff()};
}

}  // namespace fpn
