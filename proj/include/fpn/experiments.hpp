#pragma once

#include <functional>
#include <iosfwd>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "fpn/config.hpp"

namespace fpn {

/// One estimate of h from y. `h_true` is only read by oracle estimators.
struct Estimate {
  Vec h;
  int iterations = 0;
};
using Estimator = std::function<Estimate(const Vec& y, const Vec& h_true)>;

struct NamedEstimator {
  std::string name;
  Estimator run;
};

/// LS, OMP, FISTA, OAMP and, when `theta` is given, FPN-OAMP.
std::vector<NamedEstimator> standard_estimators(const RunConfig& cfg,
                                                const MeasurementOperator& op,
                                                const NleParameters* theta);

/// Test set for one SNR point; `tag` separates independent draws.
Dataset make_test_set(const RunConfig& cfg, const MeasurementOperator& op, double snr_db, int n,
                      const std::string& tag = "test");

struct NmseRow {
  double snr_db = 0.0;
  std::string method;
  double nmse_db = 0.0;
  double mean_iterations = 0.0;
  double wall_time = 0.0;  // seconds per sample, solve only; 0 in deterministic mode
};

std::vector<NmseRow> eval_nmse(const RunConfig& cfg, const MeasurementOperator& op,
                               const std::vector<NamedEstimator>& methods,
                               const std::vector<double>& snr_grid, int n_test,
                               bool deterministic = false);

struct TraceRow {
  std::string method;
  int iteration = 0;
  double nmse_db = 0.0;
  double residual = 0.0;  // mean ||h - f(h)||, FPN-OAMP only (NaN otherwise)
  double objective = 0.0; // mean FISTA objective (NaN otherwise)
};

/// Per-iteration NMSE of FPN-OAMP (and its residual), FISTA and OAMP over
/// `iterations` steps at one SNR.
std::vector<TraceRow> convergence_trace(const RunConfig& cfg, const MeasurementOperator& op,
                                        const NleParameters& theta, double snr_db, int n_test,
                                        int iterations);

/// Residual traces of individual FPN-OAMP solves (absolute residual per step).
std::vector<std::vector<double>> residual_traces(const NleParameters& theta,
                                                 const MeasurementOperator& op, const Mat& y,
                                                 const SolveOptions& opts);

struct FarFieldRow {
  std::string config;
  double r = 0.0;
  double r_over_rayleigh = 0.0;
  double error_db = 0.0;
  double rayleigh = 0.0;
};

/// Far-field approximation error averaged over a fixed set of directions, for
/// distances r = m * D_Rayleigh of each geometry.
std::vector<FarFieldRow> farfield_error_curve(
    const std::vector<std::pair<std::string, ArrayGeometry>>& geometries,
    const std::vector<double>& rayleigh_multiples);

/// Log-spaced multiples lo..hi with n points.
std::vector<double> log_grid(double lo, double hi, int n);

struct OodShift {
  std::string id;
  std::string family;  // noise, channel, measurement
  RunConfig target;
  bool fresh_operators = false;  // evaluate over `operator_draws` new operators
  int operator_draws = 20;
  double miscal_fraction = 0.0;  // share of antennas with perturbed gain
  double miscal_std = 0.0;
  bool self_adapt = false;
  double snr_db = 10.0;
};

/// The shifts applied to a source config.
std::vector<OodShift> standard_shifts(const RunConfig& source);

struct OodRow {
  std::string shift;
  std::string family;
  double in_dist_nmse_db = 0.0;
  double ood_nmse_db = 0.0;
  std::optional<double> selfadapt_nmse_db;
  std::vector<double> ood_draws_db;  // per fresh operator
};

/// `in_dist_model` returns the model trained for a shift's target
/// distribution (nullopt: the source model is the in-distribution reference).
using InDistModel = std::function<std::optional<NleParameters>(const OodShift&)>;

OodRow run_shift(const RunConfig& source, const MeasurementOperator& source_op,
                 const NleParameters& source_model, const OodShift& shift, int n_test,
                 const InDistModel& in_dist_model);

/// In-distribution reference for a shift: the source model fine-tuned for
/// `epochs` on `n_train` samples drawn from the shifted distribution.
NleParameters finetune_for_shift(const RunConfig& source, const NleParameters& source_model,
                                 const OodShift& shift, int epochs, int n_train);

/// Training/validation sets of a shift's target distribution on `op`.
Dataset shift_dataset(const OodShift& shift, const MeasurementOperator& op, int n,
                      const std::string& split);

/// Mean NMSE (dB) of FPN-OAMP on a dataset, optionally self-adapting the model
/// to every pilot vector first.
double fpn_nmse_db(const NleParameters& theta, const MeasurementOperator& op, const Dataset& ds,
                   const SolveOptions& opts, const AdaptOptions* adapt = nullptr);

struct WidebandRow {
  int k = 0;
  double f_k = 0.0;
  std::string method;
  double nmse_db = 0.0;
};

/// Per-subcarrier NMSE with one operator shared across subcarriers and the
/// same path geometry evaluated at every f_k.
std::vector<WidebandRow> wideband_eval(const RunConfig& cfg, const MeasurementOperator& op,
                                       const NleParameters& theta, double snr_db, int n_test);

// CSV writers with fixed headers.
void write_csv(std::ostream& os, const std::vector<NmseRow>& rows);
void write_csv(std::ostream& os, const std::vector<TraceRow>& rows);
void write_csv(std::ostream& os, const std::vector<FarFieldRow>& rows);
void write_csv(std::ostream& os, const std::vector<OodRow>& rows);
void write_csv(std::ostream& os, const std::vector<WidebandRow>& rows);

/// Coefficient of determination of a least-squares line through (x, y).
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

/// Operator of a config (seeded by operator_seed).
MeasurementOperator config_operator(const RunConfig& cfg);

}  // namespace fpn
