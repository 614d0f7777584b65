#include "fpn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpn/metrics.hpp"

namespace fpn {

void TrainConfig::validate() const {
  require(epochs >= 1, "train: epochs must be >= 1");
  require(batch_size >= 1, "train: batch size must be >= 1");
  require(learning_rate > 0.0, "train: learning rate must be positive");
  require(decay_every >= 1 && decay_factor > 0.0, "train: invalid decay schedule");
  require(gamma >= 0.0, "train: gamma must be >= 0");
  require(snr_max_db >= snr_min_db, "train: empty SNR range");
  require(epsilon > 0.0 && max_iters >= 1 && eval_max_iters >= 1, "train: invalid solve options");
  require(width >= 1 && blocks >= 0, "train: invalid network shape");
  require(power_iters >= 1 && final_power_iters >= 1, "train: power iterations must be >= 1");
}

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

LossReport loss_and_gradient(const Mat& estimates, const Mat& h_gt, const Mat& y,
                             const MeasurementOperator& op, double main_weight, double aux_weight,
                             Mat* grad) {
  const Eigen::Index n = estimates.cols();
  require(n > 0, "loss: empty batch");
  require(y.cols() == n && y.rows() == op.measurement_dim(), "loss: measurement shape mismatch");
  const bool use_main = main_weight != 0.0;
  if (use_main) require(h_gt.cols() == n && h_gt.rows() == estimates.rows(), "loss: h_gt mismatch");
  if (grad) *grad = Mat::Zero(estimates.rows(), n);

  LossReport rep;
  const Mat fitted = op.M * estimates;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (use_main) {
      const double denom = h_gt.col(j).lpNorm<1>();
      require(denom > 0.0, "loss: zero-norm ground truth");
      const Vec diff = estimates.col(j) - h_gt.col(j);
      rep.main += diff.lpNorm<1>() / denom;
      if (grad) grad->col(j) += (main_weight / (denom * n)) * diff.unaryExpr(&sign);
    }
    const double ydenom = y.col(j).lpNorm<1>();
    require(ydenom > 0.0, "loss: zero-norm measurement");
    const Vec r = y.col(j) - fitted.col(j);
    rep.aux += r.lpNorm<1>() / ydenom;
    if (grad && aux_weight != 0.0)
      grad->col(j) -= (aux_weight / (ydenom * n)) * (op.M.transpose() * r.unaryExpr(&sign));
  }
  rep.main /= static_cast<double>(n);
  rep.aux /= static_cast<double>(n);
  rep.total = main_weight * rep.main + aux_weight * rep.aux;
  return rep;
}

LossReport nmae_losses(const Mat& estimates, const Mat& h_gt, const Mat& y,
                       const MeasurementOperator& op, double gamma) {
  require(gamma >= 0.0, "loss: gamma must be >= 0");
  return loss_and_gradient(estimates, h_gt, y, op, 1.0, gamma, nullptr);
}

GradientBundle one_step_gradient(const NleParameters& theta, const MeasurementOperator& op,
                                 const Mat& h_star, const Mat& y, const Mat& h_gt, double gamma,
                                 LossReport* loss, double main_weight) {
  const Mat u = le_apply_batch(op, h_star, y);
  NleTape tape;
  const Mat est = nle_forward_batch(theta, u, &tape);
  Mat upstream;
  const LossReport rep = loss_and_gradient(est, h_gt, y, op, main_weight, gamma, &upstream);
  if (loss) *loss = rep;
  return nle_backward_batch(theta, tape, upstream);
}

Vec implicit_adjoint(const Mat& jacobian, const Vec& g) {
  require(jacobian.rows() == jacobian.cols() && jacobian.rows() == g.size(),
          "implicit_adjoint: shape mismatch");
  const Mat A = (Mat::Identity(g.size(), g.size()) - jacobian).transpose();
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-10 * std::max(1.0, s(0)))
    throw NonContractiveMap("I - df/dh is singular at the fixed point");
  return A.partialPivLu().solve(g);
}

Mat nle_jacobian(const NleParameters& theta, const Vec& u) {
  const Eigen::Index d = u.size();
  const Mat copies = u.replicate(1, d);
  NleTape tape;
  nle_forward_batch(theta, copies, &tape);
  // Column i of the input gradient is J^T e_i.
  return nle_backward_batch(theta, tape, Mat::Identity(d, d)).input.transpose();
}

Mat contraction_jacobian(const NleParameters& theta, const MeasurementOperator& op, const Vec& h,
                         const Vec& y) {
  const Eigen::Index d = op.channel_dim();
  const Mat B = Mat::Identity(d, d) - op.W * op.M;
  return nle_jacobian(theta, le_apply(op, h, y)) * B;
}

GradientBundle implicit_gradient_oracle(const NleParameters& theta, const MeasurementOperator& op,
                                        const Mat& h_star, const Mat& y, const Mat& h_gt,
                                        double gamma) {
  const Eigen::Index n = h_star.cols();
  require(n > 0 && y.cols() == n && h_gt.cols() == n, "oracle: batch shape mismatch");
  GradientBundle total;
  total.params.assign(theta.values.size(), 0.0);
  total.input = Mat::Zero(h_star.rows(), n);
  const Mat u = le_apply_batch(op, h_star, y);
  const Mat est = nle_forward_batch(theta, u);
  Mat dl;
  loss_and_gradient(est, h_gt, y, op, 1.0, gamma, &dl);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Mat J = contraction_jacobian(theta, op, h_star.col(j), y.col(j));
    const Vec v = implicit_adjoint(J, dl.col(j));
    const GradientBundle g = nle_backward(theta, u.col(j), v);
    for (std::size_t k = 0; k < total.params.size(); ++k) total.params[k] += g.params[k];
    total.input.col(j) = g.input;
  }
  return total;
}

void optimizer_step(AdamState& state, std::vector<double>& theta, const std::vector<double>& grad,
                    double lr) {
  require(grad.size() == theta.size(), "optimizer_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  require(state.m.size() == theta.size() && state.v.size() == theta.size(),
          "optimizer_step: state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},         {"train_loss", e.train_loss}, {"train_main", e.train_main},
          {"train_aux", e.train_aux}, {"val_nmae", e.val_nmae},     {"val_nmse_db", e.val_nmse_db},
          {"lipschitz", e.lipschitz}, {"lr", e.lr},                 {"safeguard_hits", e.safeguard_hits},
          {"mean_iters", e.mean_iters}, {"snr_min_db", e.snr_min_db}, {"snr_max_db", e.snr_max_db}};
}

namespace {

Mat gather(const Mat& src, const std::vector<Eigen::Index>& idx, std::size_t first,
           std::size_t count) {
  Mat out(src.rows(), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) out.col(static_cast<Eigen::Index>(k)) = src.col(idx[first + k]);
  return out;
}

Mat stack_fixed_points(const std::vector<FixedPointResult>& res, Eigen::Index dim) {
  Mat h(dim, static_cast<Eigen::Index>(res.size()));
  for (std::size_t j = 0; j < res.size(); ++j) h.col(static_cast<Eigen::Index>(j)) = res[j].h_star;
  return h;
}

}  // namespace

EvalSummary evaluate(const NleParameters& theta, const MeasurementOperator& op, const Mat& y,
                     const Mat& h_gt, const SolveOptions& opts) {
  require(y.cols() == h_gt.cols() && y.cols() > 0, "evaluate: batch shape mismatch");
  const auto res = fixed_point_solve_batch(theta, op, y, opts);
  EvalSummary out;
  out.h_star = stack_fixed_points(res, op.channel_dim());
  double iters = 0.0, nmae = 0.0;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    out.nmse.push_back(nmse(out.h_star.col(j), h_gt.col(j)));
    nmae += (out.h_star.col(j) - h_gt.col(j)).lpNorm<1>() / h_gt.col(j).lpNorm<1>();
    iters += res[static_cast<std::size_t>(j)].iterations;
  }
  out.nmse_db = mean_nmse_db(out.nmse);
  out.nmae = nmae / static_cast<double>(y.cols());
  out.mean_iters = iters / static_cast<double>(y.cols());
  return out;
}

double batch_lipschitz(const TrainConfig& config, const NleParameters& theta, const Mat& u,
                       std::uint64_t seed, Eigen::Index points) {
  Rng rng = make_stream(seed, 0, 0x5afe);
  if (config.lipschitz_method == LipschitzMethod::random_probe)
    return lipschitz_estimate(theta, u, probe_scale(u, config.probe_relative), rng)
        .lipschitz_estimate;
  const Eigen::Index n = std::min<Eigen::Index>(u.cols(), points);
  return spectral_lipschitz_estimate(theta, u.leftCols(n), config.power_iters, rng)
      .lipschitz_estimate;
}

double batch_lipschitz(const TrainConfig& config, const NleParameters& theta, const Mat& u,
                       std::uint64_t seed) {
  return batch_lipschitz(config, theta, u, seed, config.lipschitz_points);
}

double batch_enforce_contraction(const TrainConfig& config, NleParameters& theta, const Mat& u,
                                 std::uint64_t seed, Eigen::Index points) {
  return enforce_contraction(
      theta, [&](const NleParameters& p) { return batch_lipschitz(config, p, u, seed, points); },
      config.contraction_target);
}

double batch_enforce_contraction(const TrainConfig& config, NleParameters& theta, const Mat& u,
                                 std::uint64_t seed) {
  return batch_enforce_contraction(config, theta, u, seed, config.lipschitz_points);
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const MeasurementOperator& op, const NleParameters* init,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  check_operator(train_set, op);
  check_operator(val_set, op);
  require(train_set.size() > 0 && val_set.size() > 0, "train: empty dataset split");

  const NleShape shape = NleShape::for_geometry(op.geometry, config.width, config.blocks, config.skip);
  NleParameters theta = init ? *init : init_params(config.seed, shape);
  require(theta.shape == shape, "train: initial parameters do not match the configured shape");

  const SolveOptions inner{config.epsilon, config.max_iters, false};
  const SolveOptions eval_opts{config.epsilon, config.eval_max_iters, false};
  AdamState adam;
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t batch_counter = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * std::pow(config.decay_factor, (epoch - 1) / config.decay_every);
    Rng shuffle = make_stream(config.seed, static_cast<std::uint64_t>(epoch), 0x5ff1e);
    std::shuffle(order.begin(), order.end(), shuffle);

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.snr_min_db = std::numeric_limits<double>::infinity();
    log.snr_max_db = -std::numeric_limits<double>::infinity();
    double loss_sum = 0.0, main_sum = 0.0, aux_sum = 0.0, iter_sum = 0.0;
    for (auto idx : order) {
      log.snr_min_db = std::min(log.snr_min_db, train_set.snr_db[static_cast<std::size_t>(idx)]);
      log.snr_max_db = std::max(log.snr_max_db, train_set.snr_db[static_cast<std::size_t>(idx)]);
    }

    const auto n = order.size();
    for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, n - first);
      const Mat y = gather(train_set.y, order, first, count);
      const Mat h_gt = gather(train_set.h, order, first, count);
      const auto solved = fixed_point_solve_batch(theta, op, y, inner);
      const Mat h_star = stack_fixed_points(solved, op.channel_dim());
      for (const auto& s : solved) iter_sum += s.iterations;

      LossReport rep;
      const GradientBundle g = one_step_gradient(theta, op, h_star, y, h_gt, config.gamma, &rep);
      optimizer_step(adam, theta.values, g.params, lr);
      const double w = static_cast<double>(count);
      loss_sum += rep.total * w;
      main_sum += rep.main * w;
      aux_sum += rep.aux * w;

      if (config.safeguard == SafeguardMode::batch) {
        const Mat u = le_apply_batch(op, h_star, y);
        const std::uint64_t probe_seed = config.seed ^ (0x9e3779b97f4a7c15ULL * ++batch_counter);
        const double L = batch_lipschitz(config, theta, u, probe_seed);
        log.lipschitz = std::max(log.lipschitz, L);
        if (L > config.contraction_target) {
          batch_enforce_contraction(config, theta, u, probe_seed);
          ++log.safeguard_hits;
        }
      }
    }
    log.train_loss = loss_sum / static_cast<double>(n);
    log.train_main = main_sum / static_cast<double>(n);
    log.train_aux = aux_sum / static_cast<double>(n);
    log.mean_iters = iter_sum / static_cast<double>(n);

    EvalSummary val = evaluate(theta, op, val_set.y, val_set.h, eval_opts);
    if (config.safeguard == SafeguardMode::epoch) {
      const Mat u = le_apply_batch(op, val.h_star, val_set.y);
      const std::uint64_t probe_seed = config.seed ^ (0x9e3779b97f4a7c15ULL * ++batch_counter);
      const double L = batch_lipschitz(config, theta, u, probe_seed);
      log.lipschitz = L;
      if (L > config.contraction_target) {
        batch_enforce_contraction(config, theta, u, probe_seed);
        ++log.safeguard_hits;
        val = evaluate(theta, op, val_set.y, val_set.h, eval_opts);
      }
    }
    log.val_nmse_db = val.nmse_db;
    log.val_nmae = val.nmae;
    if (!std::isfinite(val.nmse_db) || !std::isfinite(log.train_loss))
      throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                               " (validation NMSE is not finite)");
    if (val.nmse_db < best) {
      best = val.nmse_db;
      result.theta = theta;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  // Hard contraction check on all validation fixed points of the selected model, repeated on the
  // moved fixed points after each rescale.
  TrainConfig final_config = config;
  final_config.power_iters = config.final_power_iters;
  double L = 0.0;
  for (int round = 0; round < 5; ++round) {
    const EvalSummary val = evaluate(result.theta, op, val_set.y, val_set.h, eval_opts);
    const Mat u = le_apply_batch(op, val.h_star, val_set.y);
    L = batch_lipschitz(final_config, result.theta, u, config.seed + round, u.cols());
    if (L <= config.contraction_target) break;
    batch_enforce_contraction(final_config, result.theta, u, config.seed + round, u.cols());
  }
  result.final_lipschitz = L;
  return result;
}

NleParameters self_adapt(const NleParameters& theta, const MeasurementOperator& op, const Vec& y,
                         const AdaptOptions& opts, std::vector<double>* aux_trace) {
  require(opts.steps >= 0, "self_adapt: steps must be >= 0");
  NleParameters out = theta;
  AdamState adam;
  const Mat ym = y;
  const Mat none;
  for (int s = 0; s <= opts.steps; ++s) {
    if (s == opts.steps && !aux_trace) break;
    const auto solved = fixed_point_solve_batch(out, op, ym, opts.solve);
    const Mat h_star = solved[0].h_star;
    LossReport rep;
    if (s == opts.steps) {
      const Mat est = contraction_apply_batch(out, op, h_star, ym);
      rep = loss_and_gradient(est, none, ym, op, 0.0, 1.0, nullptr);
      aux_trace->push_back(rep.aux);
      break;
    }
    const GradientBundle g = one_step_gradient(out, op, h_star, ym, none, 1.0, &rep, 0.0);
    if (aux_trace) aux_trace->push_back(rep.aux);
    optimizer_step(adam, out.values, g.params, opts.lr);
  }
  return out;
}

}  // namespace fpn
