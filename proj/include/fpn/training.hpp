#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fpn/dataset.hpp"
#include "fpn/fpn.hpp"
#include "fpn/nle.hpp"

namespace fpn {

/// When the head is rescaled toward the contraction target during training:
/// after every batch, after every epoch, or only once at the end.
enum class SafeguardMode { batch, epoch, final };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  int decay_every = 30;      // epochs between learning-rate halvings
  double decay_factor = 0.5;
  double gamma = 0.3;        // auxiliary loss weight
  double snr_min_db = 0.0;
  double snr_max_db = 20.0;
  double epsilon = 0.01;     // inner solve
  int max_iters = 15;
  int eval_max_iters = 50;   // validation solves
  int width = 32;            // C
  int blocks = 3;            // B
  double skip = 0.5;         // global skip gain
  SafeguardMode safeguard = SafeguardMode::epoch;
  LipschitzMethod lipschitz_method = LipschitzMethod::spectral;
  double probe_relative = 1e-2;   // random_probe perturbation scale
  int power_iters = 6;            // spectral
  int final_power_iters = 30;     // final check on the validation set
  int lipschitz_points = 16;      // batch columns probed by the spectral estimate
  double contraction_target = 1.0;
  std::uint64_t seed = 0;
  void validate() const;
};

struct LossReport {
  double main = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

/// NMAE pair for estimates e_i = f_theta(h*_i; y_i) (columns):
/// main = mean ||h_gt - e||_1 / ||h_gt||_1, aux = mean ||y - M e||_1 / ||y||_1.
LossReport nmae_losses(const Mat& estimates, const Mat& h_gt, const Mat& y,
                       const MeasurementOperator& op, double gamma);

/// Loss and its gradient with respect to the estimates. `main_weight` = 0
/// drops the supervised term (h_gt may then be empty).
LossReport loss_and_gradient(const Mat& estimates, const Mat& h_gt, const Mat& y,
                             const MeasurementOperator& op, double main_weight, double aux_weight,
                             Mat* grad);

/// Gradient of the loss through one application f_theta(h*; y), h* held
/// constant. `input` holds the gradient with respect to the NLE input.
GradientBundle one_step_gradient(const NleParameters& theta, const MeasurementOperator& op,
                                 const Mat& h_star, const Mat& y, const Mat& h_gt, double gamma,
                                 LossReport* loss = nullptr, double main_weight = 1.0);

/// Raised when I - df/dh is singular at the fixed point.
class NonContractiveMap : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Solves (I - J)^T v = g. Throws NonContractiveMap when I - J is singular.
Vec implicit_adjoint(const Mat& jacobian, const Vec& g);

/// Dense Jacobian of the NLE at u.
Mat nle_jacobian(const NleParameters& theta, const Vec& u);

/// Dense Jacobian of f_theta(.; y) at h.
Mat contraction_jacobian(const NleParameters& theta, const MeasurementOperator& op, const Vec& h,
                         const Vec& y);

/// dL/dtheta through the fixed point, summed over the columns of h_star.
/// Intended for tiny instances only.
GradientBundle implicit_gradient_oracle(const NleParameters& theta, const MeasurementOperator& op,
                                        const Mat& h_star, const Mat& y, const Mat& h_gt,
                                        double gamma);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void optimizer_step(AdamState& state, std::vector<double>& theta, const std::vector<double>& grad,
                    double lr);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_main = 0.0;
  double train_aux = 0.0;
  double val_nmae = 0.0;
  double val_nmse_db = 0.0;
  double lipschitz = 0.0;  // largest estimate before the safeguard
  double lr = 0.0;
  int safeguard_hits = 0;
  double mean_iters = 0.0;
  double snr_min_db = 0.0;
  double snr_max_db = 0.0;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
  NleParameters theta;  // best validation NMSE
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double final_lipschitz = 0.0;  // on the validation fixed points
};

/// `init` warm-starts from existing parameters; `on_epoch` sees every log record.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const MeasurementOperator& op, const NleParameters* init = nullptr,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean NMSE (dB), mean NMAE and mean iteration count of the fixed-point
/// estimates over a dataset.
struct EvalSummary {
  double nmse_db = 0.0;
  double nmae = 0.0;
  double mean_iters = 0.0;
  std::vector<double> nmse;  // per sample, linear
  Mat h_star;
};
EvalSummary evaluate(const NleParameters& theta, const MeasurementOperator& op, const Mat& y,
                     const Mat& h_gt, const SolveOptions& opts);

struct AdaptOptions {
  int steps = 5;
  double lr = 1e-3;
  SolveOptions solve{0.01, 15, false};
};

/// Lipschitz estimate of the NLE around the columns of `u` with the
/// configured method. The spectral method probes the first `points` columns
/// (default lipschitz_points).
double batch_lipschitz(const TrainConfig& config, const NleParameters& theta, const Mat& u,
                       std::uint64_t seed);
double batch_lipschitz(const TrainConfig& config, const NleParameters& theta, const Mat& u,
                       std::uint64_t seed, Eigen::Index points);

/// Scales the final kernel until batch_lipschitz <= contraction_target.
double batch_enforce_contraction(const TrainConfig& config, NleParameters& theta, const Mat& u,
                                 std::uint64_t seed);
double batch_enforce_contraction(const TrainConfig& config, NleParameters& theta, const Mat& u,
                                 std::uint64_t seed, Eigen::Index points);

/// Fine-tunes on the auxiliary loss of a single pilot vector. `aux_trace`
/// receives the aux loss before each step and after the last.
NleParameters self_adapt(const NleParameters& theta, const MeasurementOperator& op, const Vec& y,
                         const AdaptOptions& opts, std::vector<double>* aux_trace = nullptr);

}  // namespace fpn
