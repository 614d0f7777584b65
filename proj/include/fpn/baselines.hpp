#pragma once

#include <vector>

#include "fpn/measurement.hpp"
#include "fpn/metrics.hpp"

namespace fpn {

struct BaselineConfig {
  int max_iters = 200;
  double tolerance = 1e-7;
  double fista_lambda = 0.02;
  int omp_sparsity = 10;             // 2L for the reference channel
  double omp_residual_tol = 0.0;     // > 0 switches OMP to a residual stopping rule
  double oamp_sparsity = 0.1;        // Bernoulli-Gaussian activity
  double oamp_prior_var = 1.0;       // variance of the active components
  double noise_var = 0.0;            // per real component; 0 = unknown/noiseless
  bool oamp_lmmse = false;           // LMMSE linear estimator (small problems only)
};

/// Output of an iterative estimator. Traces hold one entry per iteration;
/// nmse_db is only filled when a ground truth is supplied.
struct IterativeEstimate {
  Vec h;
  int iterations = 0;
  std::vector<double> nmse_db;
  std::vector<double> objective;
};

/// Minimum-norm least squares, M^+ y.
Vec ls_estimate(const Vec& y, const Mat& M);
Vec ls_estimate_cached(const Vec& y, const MeasurementOperator& op);

/// Greedy OMP with least squares on the active set after every selection.
/// Stops after k atoms, or earlier once ||r|| <= residual_tol * ||y|| when
/// residual_tol > 0.
Vec omp_estimate(const Vec& y, const Mat& M, int k, double residual_tol = 0.0);

/// Monotone FISTA on 0.5||y - Mh||^2 + lambda ||h||_1 with step 1/sigma_max(M)^2
/// and no momentum restarts. `lipschitz` <= 0 computes sigma_max(M)^2 here.
IterativeEstimate fista_estimate(const Vec& y, const Mat& M, double lambda, int iters,
                                 const Vec* truth = nullptr, double lipschitz = 0.0);

double soft_threshold(double x, double t);

struct BernoulliGaussian {
  double sparsity = 0.1;
  double variance = 1.0;
};

/// Posterior mean E[x | x + N(0, tau2) = u] and its derivative in u.
std::pair<double, double> bg_posterior_mean(double u, double tau2, const BernoulliGaussian& prior);

/// OAMP with the de-correlated pseudo-inverse LE of `op` (or LMMSE when
/// requested) and a divergence-free Bernoulli-Gaussian denoiser. The returned
/// estimate is the posterior mean of the last iteration.
IterativeEstimate oamp_bg_estimate(const Vec& y, const MeasurementOperator& op,
                                   const BernoulliGaussian& prior, double noise_var, int iters,
                                   const Vec* truth = nullptr, bool lmmse = false);

}  // namespace fpn
