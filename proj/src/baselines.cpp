#include "fpn/baselines.hpp"

#include <cmath>
#include <limits>

namespace fpn {

Vec ls_estimate(const Vec& y, const Mat& M) {
  require(y.size() == M.rows(), "ls_estimate: dimension mismatch");
  return pseudo_inverse(M) * y;
}

Vec ls_estimate_cached(const Vec& y, const MeasurementOperator& op) {
  require(y.size() == op.measurement_dim(), "ls_estimate: dimension mismatch");
  return op.M_pinv * y;
}

Vec omp_estimate(const Vec& y, const Mat& M, int k, double residual_tol) {
  require(y.size() == M.rows(), "omp_estimate: dimension mismatch");
  require(k >= 1 && k <= M.cols(), "omp_estimate: sparsity out of range");
  const Eigen::Index n = M.cols();
  Vec h = Vec::Zero(n);
  const double ynorm = y.norm();
  if (ynorm == 0.0) return h;

  const Vec colnorm = M.colwise().norm().transpose();
  std::vector<Eigen::Index> active;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  Vec r = y;
  Vec coef;
  for (int step = 0; step < k; ++step) {
    const Vec corr = M.transpose() * r;
    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[j] || colnorm(j) == 0.0) continue;
      const double score = std::abs(corr(j)) / colnorm(j);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0) break;
    used[best] = true;
    active.push_back(best);

    Mat sub(M.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) sub.col(a) = M.col(active[a]);
    coef = sub.colPivHouseholderQr().solve(y);
    r = y - sub * coef;
    if (residual_tol > 0.0 && r.norm() <= residual_tol * ynorm) break;
    if (r.norm() <= 1e-14 * ynorm) break;
  }
  for (std::size_t a = 0; a < active.size(); ++a) h(active[a]) = coef(a);
  return h;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

IterativeEstimate fista_estimate(const Vec& y, const Mat& M, double lambda, int iters,
                                 const Vec* truth, double lipschitz) {
  require(y.size() == M.rows(), "fista_estimate: dimension mismatch");
  require(iters >= 1, "fista_estimate: iters must be >= 1");
  require(lambda >= 0.0, "fista_estimate: lambda must be nonnegative");
  double L = lipschitz;
  if (L <= 0.0) {
    Eigen::JacobiSVD<Mat> svd(M);
    L = svd.singularValues()(0) * svd.singularValues()(0);
  }
  const double step = 1.0 / L;
  const Eigen::Index n = M.cols();
  auto objective = [&](const Vec& h) {
    return 0.5 * (y - M * h).squaredNorm() + lambda * h.lpNorm<1>();
  };

  IterativeEstimate out;
  Vec x = Vec::Zero(n), z = x, u(n);
  double fx = objective(x);
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Vec grad = M.transpose() * (M * z - y);
    for (Eigen::Index i = 0; i < n; ++i)
      u(i) = soft_threshold(z(i) - step * grad(i), step * lambda);
    const double fu = objective(u);
    const Vec x_prev = x;
    // Monotone variant: keep the better of the prox point and the previous iterate.
    if (fu <= fx) {
      x = u;
      fx = fu;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x + (t / t_next) * (u - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;

    out.objective.push_back(fx);
    if (truth) out.nmse_db.push_back(nmse_db(x, *truth));
  }
  out.h = x;
  out.iterations = iters;
  return out;
}

std::pair<double, double> bg_posterior_mean(double u, double tau2, const BernoulliGaussian& prior) {
  const double sx2 = prior.variance;
  const double g = sx2 / (sx2 + tau2);
  if (prior.sparsity >= 1.0) return {g * u, g};
  if (prior.sparsity <= 0.0) return {0.0, 0.0};
  const double a = 1.0 / tau2 - 1.0 / (sx2 + tau2);
  const double logit = std::log(prior.sparsity / (1.0 - prior.sparsity)) +
                       0.5 * std::log(tau2 / (sx2 + tau2)) + 0.5 * u * u * a;
  const double pi = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                               : std::exp(logit) / (1.0 + std::exp(logit));
  const double dpi = pi * (1.0 - pi) * u * a;
  return {pi * g * u, g * pi + g * u * dpi};
}

IterativeEstimate oamp_bg_estimate(const Vec& y, const MeasurementOperator& op,
                                   const BernoulliGaussian& prior, double noise_var, int iters,
                                   const Vec* truth, bool lmmse) {
  require(y.size() == op.measurement_dim(), "oamp_bg_estimate: dimension mismatch");
  require(prior.sparsity > 0.0 && prior.sparsity <= 1.0, "oamp: sparsity must lie in (0, 1]");
  require(prior.variance > 0.0, "oamp: prior variance must be positive");
  require(iters >= 1, "oamp: iters must be >= 1");
  const Mat& M = op.M;
  const Eigen::Index N = M.cols();
  const Eigen::Index m = M.rows();
  const double trMtM = M.squaredNorm();
  const Mat I = Mat::Identity(N, N);

  double trBB = 0.0, trWW = 0.0;
  if (!lmmse) {
    trBB = (I - op.W * M).squaredNorm() / static_cast<double>(N);
    trWW = op.W.squaredNorm() / static_cast<double>(N);
  }

  IterativeEstimate out;
  Vec h = Vec::Zero(N), est = Vec::Zero(N);
  for (int t = 0; t < iters; ++t) {
    const Vec r = y - M * h;
    const double v2 = std::max((r.squaredNorm() - static_cast<double>(m) * noise_var) / trMtM, 1e-12);
    Vec u;
    double tau2;
    if (lmmse) {
      const Mat gram = M * M.transpose() + (noise_var / v2) * Mat::Identity(m, m);
      const Mat What = M.transpose() * gram.ldlt().solve(Mat::Identity(m, m));
      const Mat W = (static_cast<double>(N) / (What * M).trace()) * What;
      u = h + W * r;
      tau2 = ((I - W * M).squaredNorm() * v2 + W.squaredNorm() * noise_var) / static_cast<double>(N);
    } else {
      u = h + op.W * r;
      tau2 = trBB * v2 + trWW * noise_var;
    }
    tau2 = std::max(tau2, 1e-300);
    double div = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto [mean, deriv] = bg_posterior_mean(u(i), tau2, prior);
      est(i) = mean;
      div += deriv;
    }
    div /= static_cast<double>(N);
    // Divergence-free correction keeps the next LE input error uncorrelated.
    h = div < 1.0 - 1e-9 ? Vec((est - div * u) / (1.0 - div)) : est;

    out.objective.push_back(r.squaredNorm());
    if (truth) out.nmse_db.push_back(nmse_db(est, *truth));
  }
  out.h = est;
  out.iterations = iters;
  return out;
}

}  // namespace fpn
