#pragma once

#include <functional>
#include <vector>

#include "fpn/channel.hpp"
#include "fpn/measurement.hpp"
#include "fpn/nle.hpp"

namespace fpn {

/// u = h + W (y - M h).
Vec le_apply(const MeasurementOperator& op, const Vec& h, const Vec& y);
Mat le_apply_batch(const MeasurementOperator& op, const Mat& h, const Mat& y);

/// f_theta(h; y) = NLE(LE(h; y)).
Vec contraction_apply(const NleParameters& theta, const MeasurementOperator& op, const Vec& h,
                      const Vec& y);
Mat contraction_apply_batch(const NleParameters& theta, const MeasurementOperator& op,
                            const Mat& h, const Mat& y);

struct FixedPointResult {
  Vec h_star;
  int iterations = 0;                  // applications of f
  std::vector<double> residual_trace;  // ||h(t) - f(h(t))||_2, one per application
  bool converged = false;
  std::vector<Vec> iterates;           // h(0), h(1), ... when requested
};

struct SolveOptions {
  double epsilon = 0.01;
  int max_iters = 50;
  bool keep_iterates = false;
};

/// Picard iteration of an arbitrary map from h0 until the residual drops to
/// epsilon. On convergence h_star is the last iterate h(t) whose residual
/// passed the test; otherwise it is the last update.
FixedPointResult fixed_point_iterate(const std::function<Vec(const Vec&)>& f, const Vec& h0,
                                     const SolveOptions& opts);

/// Algorithm starting from h(0) = 0.
FixedPointResult fixed_point_solve(const NleParameters& theta, const MeasurementOperator& op,
                                   const Vec& y, const SolveOptions& opts = {});

/// Solves every column of `y` together; converged columns leave the batch.
/// `h0` (optional) gives per-column starting points.
std::vector<FixedPointResult> fixed_point_solve_batch(const NleParameters& theta,
                                                      const MeasurementOperator& op, const Mat& y,
                                                      const SolveOptions& opts = {},
                                                      const Mat* h0 = nullptr);

/// random_probe: ratio of output to input perturbation norms under Gaussian
/// probes. spectral: largest local Jacobian norm by power iteration.
enum class LipschitzMethod { random_probe, spectral };

struct ContractionDiagnostics {
  double lipschitz_estimate = 0.0;
  int probes = 0;
  double perturbation_scale = 0.0;
};

/// sum_i ||g(x_i + d_i) - g(x_i)|| / sum_i ||d_i|| with d_i ~ N(0, scale^2 I),
/// for a batched map g over the columns of `points`.
ContractionDiagnostics lipschitz_estimate_map(const std::function<Mat(const Mat&)>& g,
                                              const Mat& points, double scale, Rng& rng);

/// Estimate for the NLE around a batch of fixed points.
ContractionDiagnostics lipschitz_estimate(const NleParameters& theta, const Mat& fixed_points,
                                          double scale, Rng& rng);

/// max_i ||J(x_i)||_2 for the NLE Jacobian at the columns of `points`: power
/// iteration on J^T J with exact vector-Jacobian products and forward-difference
/// Jacobian-vector products.
ContractionDiagnostics spectral_lipschitz_estimate(const NleParameters& theta, const Mat& points,
                                                   int iterations, Rng& rng);

/// Default probe scale: `relative` times the RMS entry of `points`.
double probe_scale(const Mat& points, double relative = 1e-2);

/// Scales the final 1x1 kernel by (1 / L_hat)(1 - 1e-3) when L_hat > 1; biases
/// and normalization parameters are left untouched.
NleParameters safeguard_normalize(const NleParameters& theta, double L_hat);

/// Scale factor s <= 1 for a map whose Lipschitz estimate at scale s is
/// `lipschitz_at(s)`. Tries the one-shot (1 / L)(1 - 1e-3) first, then secant
/// steps, then bisection when the map does not scale homogeneously.
double contraction_scale(const std::function<double(double)>& lipschitz_at, double L_hat,
                         double target = 1.0);

/// Re-estimates on the same probes after scaling the final kernel until the
/// estimate is <= 1. Returns the final estimate.
double enforce_contraction(NleParameters& theta, const Mat& fixed_points, double scale,
                           std::uint64_t seed);

/// Same with an arbitrary estimator; scales the final kernel until
/// `estimate(theta) <= target`.
double enforce_contraction(NleParameters& theta,
                           const std::function<double(const NleParameters&)>& estimate,
                           double target = 1.0);

}  // namespace fpn
