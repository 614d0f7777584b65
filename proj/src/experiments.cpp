#include "fpn/experiments.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "fpn/metrics.hpp"

namespace fpn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double noise_variance(const Vec& y, double snr_db) {
  // E||y||^2 = (1 + 1/snr) * signal power, split per real component.
  const double snr = std::pow(10.0, snr_db / 10.0);
  return y.squaredNorm() / static_cast<double>(y.size()) / (1.0 + snr);
}

double mean_db_from_db(const std::vector<double>& values_db) {
  std::vector<double> lin;
  lin.reserve(values_db.size());
  for (double v : values_db) lin.push_back(std::pow(10.0, v / 10.0));
  return mean_nmse_db(lin);
}

}  // namespace

MeasurementOperator config_operator(const RunConfig& cfg) {
  return make_operator(cfg.operator_seed, cfg.geometry, cfg.pilot);
}

Dataset make_test_set(const RunConfig& cfg, const MeasurementOperator& op, double snr_db, int n,
                      const std::string& tag) {
  SampleSpec spec = cfg.sample_spec();
  spec.snr_min_db = spec.snr_max_db = snr_db;
  std::ostringstream key;
  key << tag << "@" << std::setprecision(17) << snr_db;
  return generate_dataset(cfg.split_seed(key.str()), spec, op, n, tag, cfg.operator_seed);
}

std::vector<NamedEstimator> standard_estimators(const RunConfig& cfg,
                                                const MeasurementOperator& op,
                                                const NleParameters* theta) {
  const BaselineConfig b = cfg.baselines;
  const Eigen::JacobiSVD<Mat> svd(op.M);
  const double lip = svd.singularValues()(0) * svd.singularValues()(0);
  std::vector<NamedEstimator> out;
  out.push_back({"LS", [&op](const Vec& y, const Vec&) { return Estimate{ls_estimate_cached(y, op), 1}; }});
  out.push_back({"OMP", [&op, b](const Vec& y, const Vec&) {
                   return Estimate{omp_estimate(y, op.M, b.omp_sparsity, b.omp_residual_tol),
                                   b.omp_sparsity};
                 }});
  out.push_back({"FISTA", [&op, b, lip](const Vec& y, const Vec&) {
                   const auto r = fista_estimate(y, op.M, b.fista_lambda, b.max_iters, nullptr, lip);
                   return Estimate{r.h, r.iterations};
                 }});
  out.push_back({"OAMP", [&op, b](const Vec& y, const Vec&) {
                   const auto r = oamp_bg_estimate(y, op, {b.oamp_sparsity, b.oamp_prior_var},
                                                   b.noise_var, b.max_iters, nullptr, b.oamp_lmmse);
                   return Estimate{r.h, r.iterations};
                 }});
  if (theta) {
    const SolveOptions opts = cfg.inference;
    out.push_back({"FPN-OAMP", [&op, theta, opts](const Vec& y, const Vec&) {
                     const auto r = fixed_point_solve(*theta, op, y, opts);
                     return Estimate{r.h_star, r.iterations};
                   }});
  }
  return out;
}

std::vector<NmseRow> eval_nmse(const RunConfig& cfg, const MeasurementOperator& op,
                               const std::vector<NamedEstimator>& methods,
                               const std::vector<double>& snr_grid, int n_test,
                               bool deterministic) {
  require(!snr_grid.empty(), "eval_nmse: SNR grid must be nonempty");
  std::vector<NmseRow> rows;
  for (double snr : snr_grid) {
    const Dataset ds = make_test_set(cfg, op, snr, n_test);
    for (const auto& m : methods) {
      std::vector<double> errs;
      double iters = 0.0, seconds = 0.0;
      for (Eigen::Index j = 0; j < ds.size(); ++j) {
        const Vec y = ds.y.col(j), h = ds.h.col(j);
        const auto t0 = std::chrono::steady_clock::now();
        const Estimate e = m.run(y, h);
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        errs.push_back(nmse(e.h, h));
        iters += e.iterations;
      }
      const double n = static_cast<double>(ds.size());
      rows.push_back({snr, m.name, mean_nmse_db(errs), iters / n, deterministic ? 0.0 : seconds / n});
    }
  }
  return rows;
}

std::vector<TraceRow> convergence_trace(const RunConfig& cfg, const MeasurementOperator& op,
                                        const NleParameters& theta, double snr_db, int n_test,
                                        int iterations) {
  require(iterations >= 1, "convergence_trace: iterations must be >= 1");
  const Dataset ds = make_test_set(cfg, op, snr_db, n_test, "trace");
  const auto n = static_cast<double>(ds.size());
  std::vector<TraceRow> rows;

  // FPN-OAMP: row t holds h(t) = f^t(0) and its residual ||h(t) - f(h(t))||.
  Mat h = Mat::Zero(op.channel_dim(), ds.size());
  Mat next = contraction_apply_batch(theta, op, h, ds.y);
  for (int t = 1; t <= iterations; ++t) {
    h = next;
    next = contraction_apply_batch(theta, op, h, ds.y);
    std::vector<double> errs;
    for (Eigen::Index j = 0; j < ds.size(); ++j) errs.push_back(nmse(h.col(j), ds.h.col(j)));
    const double res = (h - next).colwise().norm().sum() / n;
    rows.push_back({"FPN-OAMP", t, mean_nmse_db(errs), res, kNaN});
  }

  const Eigen::JacobiSVD<Mat> svd(op.M);
  const double lip = svd.singularValues()(0) * svd.singularValues()(0);
  std::vector<std::vector<double>> fista_db(static_cast<std::size_t>(iterations)),
      fista_obj(static_cast<std::size_t>(iterations)), oamp_db(static_cast<std::size_t>(iterations));
  const auto& b = cfg.baselines;
  for (Eigen::Index j = 0; j < ds.size(); ++j) {
    const Vec y = ds.y.col(j), truth = ds.h.col(j);
    const auto f = fista_estimate(y, op.M, b.fista_lambda, iterations, &truth, lip);
    const auto o = oamp_bg_estimate(y, op, {b.oamp_sparsity, b.oamp_prior_var},
                                    noise_variance(y, snr_db), iterations, &truth, b.oamp_lmmse);
    for (int t = 0; t < iterations; ++t) {
      const auto ft = std::min<std::size_t>(t, f.nmse_db.size() - 1);
      const auto ot = std::min<std::size_t>(t, o.nmse_db.size() - 1);
      fista_db[t].push_back(f.nmse_db[ft]);
      fista_obj[t].push_back(f.objective[ft]);
      oamp_db[t].push_back(o.nmse_db[ot]);
    }
  }
  for (int t = 0; t < iterations; ++t) {
    double obj = 0.0;
    for (double v : fista_obj[t]) obj += v;
    rows.push_back({"FISTA", t + 1, mean_db_from_db(fista_db[t]), kNaN, obj / n});
  }
  for (int t = 0; t < iterations; ++t)
    rows.push_back({"OAMP", t + 1, mean_db_from_db(oamp_db[t]), kNaN, kNaN});
  return rows;
}

std::vector<std::vector<double>> residual_traces(const NleParameters& theta,
                                                 const MeasurementOperator& op, const Mat& y,
                                                 const SolveOptions& opts) {
  std::vector<std::vector<double>> out;
  for (auto& r : fixed_point_solve_batch(theta, op, y, opts)) out.push_back(std::move(r.residual_trace));
  return out;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

std::vector<FarFieldRow> farfield_error_curve(
    const std::vector<std::pair<std::string, ArrayGeometry>>& geometries,
    const std::vector<double>& rayleigh_multiples) {
  std::vector<FarFieldRow> rows;
  const double thetas[] = {0.0, kPi / 6, kPi / 3};
  const double phis[] = {0.0, kPi / 4, kPi / 2};
  for (const auto& [name, g] : geometries) {
    const double dr = aperture_and_rayleigh(g).rayleigh;
    for (double m : rayleigh_multiples) {
      require(m > 0.0, "farfield_error_curve: distances must be positive");
      const double r = m * dr;
      double err = 0.0;
      for (double th : thetas)
        for (double ph : phis) err += farfield_error(g, ph, th, r, g.carrier);
      rows.push_back({name, r, m, to_db(err / 9.0), dr});
    }
  }
  return rows;
}

std::vector<OodShift> standard_shifts(const RunConfig& source) {
  const double dr = aperture_and_rayleigh(source.geometry).rayleigh;
  std::vector<OodShift> out;
  auto add = [&](std::string id, std::string family, auto&& edit, double snr = 10.0) {
    OodShift s;
    s.id = std::move(id);
    s.family = std::move(family);
    s.target = source;
    s.snr_db = snr;
    edit(s);
    s.target.validate();
    out.push_back(std::move(s));
  };
  add("snr_-5dB", "noise", [](OodShift&) {}, -5.0);
  add("snr_25dB", "noise", [](OodShift&) {}, 25.0);
  add("impulsive_alpha1.8", "noise", [](OodShift& s) {
    s.target.noise.kind = NoiseKind::alpha_stable;
    s.target.noise.alpha = 1.8;
    s.target.noise.gsnr_db = 15.0;
  });
  add("los_blockage", "channel", [](OodShift& s) { s.target.channel.los_present = false; });
  add("L3", "channel", [](OodShift& s) { s.target.channel.num_paths = 3; });
  add("L7", "channel", [](OodShift& s) { s.target.channel.num_paths = 7; });
  add("near_only", "channel", [dr](OodShift& s) {
    s.target.channel.los_distance = 0.9 * dr;
    s.target.channel.nlos_min = 0.5 * dr;
    s.target.channel.nlos_max = 0.9 * dr;
  });
  add("far_only", "channel", [dr](OodShift& s) {
    s.target.channel.los_distance = 1.5 * dr;
    s.target.channel.nlos_min = 1.0 * dr;
    s.target.channel.nlos_max = 1.5 * dr;
  });
  add("d_sub_half", "channel", [](OodShift& s) { s.target.geometry.sa_spacing *= 0.5; });
  add("d_a_0.4lambda", "channel",
      [](OodShift& s) { s.target.geometry.ae_spacing = 0.4 * s.target.geometry.wavelength(); });
  add("gain_miscalibration", "channel", [](OodShift& s) {
    s.miscal_fraction = 0.2;
    s.miscal_std = 0.2;
  });
  const int sbar = source.geometry.antennas_per_subarray;
  auto rho = [sbar](double r) { return std::max(1, static_cast<int>(std::lround(r * sbar))); };
  add("rho_70", "measurement", [&](OodShift& s) {
    s.target.pilot.num_slots = rho(0.7);
    s.self_adapt = true;
  }, 15.0);
  add("rho_30", "measurement", [&](OodShift& s) {
    s.target.pilot.num_slots = rho(0.3);
    s.self_adapt = true;
  }, 15.0);
  add("rho_10", "measurement", [&](OodShift& s) {
    s.target.pilot.num_slots = rho(0.1);
    s.self_adapt = true;
  }, 15.0);
  add("infinite_resolution", "measurement", [](OodShift& s) {
    s.target.pilot.resolution = CombinerResolution::infinite;
    s.self_adapt = true;
  }, 15.0);
  add("fresh_operators", "measurement", [](OodShift& s) { s.fresh_operators = true; }, 15.0);
  return out;
}

double fpn_nmse_db(const NleParameters& theta, const MeasurementOperator& op, const Dataset& ds,
                   const SolveOptions& opts, const AdaptOptions* adapt) {
  std::vector<double> errs;
  if (!adapt) {
    const auto res = fixed_point_solve_batch(theta, op, ds.y, opts);
    for (Eigen::Index j = 0; j < ds.size(); ++j)
      errs.push_back(nmse(res[static_cast<std::size_t>(j)].h_star, ds.h.col(j)));
    return mean_nmse_db(errs);
  }
  for (Eigen::Index j = 0; j < ds.size(); ++j) {
    const Vec y = ds.y.col(j);
    const NleParameters tuned = self_adapt(theta, op, y, *adapt);
    errs.push_back(nmse(fixed_point_solve(tuned, op, y, opts).h_star, ds.h.col(j)));
  }
  return mean_nmse_db(errs);
}

Dataset shift_dataset(const OodShift& s, const MeasurementOperator& op, int n,
                      const std::string& split) {
  const RunConfig& cfg = s.target;
  SampleSpec spec = cfg.sample_spec();
  if (split == "test") spec.snr_min_db = spec.snr_max_db = s.snr_db;
  if (s.miscal_fraction > 0.0)
    spec.antenna_gains = miscalibrated_gains(cfg.split_seed("miscal"), cfg.geometry.num_antennas(),
                                             s.miscal_fraction, s.miscal_std);
  const std::string tag = "ood-" + s.id + "-" + split;
  return generate_dataset(cfg.split_seed(tag), spec, op, n, tag, cfg.operator_seed);
}

namespace {

Dataset shift_test_set(const OodShift& s, const MeasurementOperator& op, int n) {
  return shift_dataset(s, op, n, "test");
}

}  // namespace

NleParameters finetune_for_shift(const RunConfig& source, const NleParameters& source_model,
                                 const OodShift& shift, int epochs, int n_train) {
  require(epochs >= 1 && n_train >= 1, "finetune_for_shift: epochs and n_train must be >= 1");
  const MeasurementOperator op = config_operator(shift.target);
  const Dataset tr = shift_dataset(shift, op, n_train, "train");
  const Dataset va = shift_dataset(shift, op, std::max(1, source.n_val / 2), "val");
  TrainConfig tc = source.train;
  tc.epochs = epochs;
  tc.decay_every = std::max(1, epochs);
  tc.seed = source.split_seed("finetune-" + shift.id);
  return train(tc, tr, va, op, &source_model).theta;
}

OodRow run_shift(const RunConfig& source, const MeasurementOperator& source_op,
                 const NleParameters& source_model, const OodShift& shift, int n_test,
                 const InDistModel& in_dist_model) {
  OodRow row;
  row.shift = shift.id;
  row.family = shift.family;
  const SolveOptions& opts = source.inference;

  if (shift.fresh_operators) {
    const Dataset base = shift_test_set(shift, source_op, n_test);
    row.in_dist_nmse_db = fpn_nmse_db(source_model, source_op, base, opts);
    std::vector<double> draws;
    for (int d = 1; d <= shift.operator_draws; ++d) {
      const MeasurementOperator op =
          make_operator(source.operator_seed + 1000 + static_cast<std::uint64_t>(d),
                        shift.target.geometry, shift.target.pilot);
      const Dataset ds = shift_test_set(shift, op, n_test);
      draws.push_back(fpn_nmse_db(source_model, op, ds, opts));
      row.ood_draws_db.push_back(draws.back());
    }
    double mean = 0.0;
    for (double v : draws) mean += v;
    row.ood_nmse_db = mean / static_cast<double>(draws.size());
    return row;
  }

  const bool same_op = shift.target.pilot.num_slots == source.pilot.num_slots &&
                       shift.target.pilot.resolution == source.pilot.resolution &&
                       shift.target.operator_seed == source.operator_seed;
  const MeasurementOperator op = same_op ? source_op : config_operator(shift.target);
  const Dataset ds = shift_test_set(shift, op, n_test);
  const std::optional<NleParameters> reference = in_dist_model ? in_dist_model(shift) : std::nullopt;
  row.in_dist_nmse_db = fpn_nmse_db(reference ? *reference : source_model, op, ds, opts);
  row.ood_nmse_db = fpn_nmse_db(source_model, op, ds, opts);
  if (shift.self_adapt) row.selfadapt_nmse_db = fpn_nmse_db(source_model, op, ds, opts, &source.adapt);
  return row;
}

std::vector<WidebandRow> wideband_eval(const RunConfig& cfg, const MeasurementOperator& op,
                                       const NleParameters& theta, double snr_db, int n_test) {
  const auto freqs = cfg.wideband.frequencies(cfg.geometry.carrier);
  SampleSpec spec = cfg.sample_spec();
  spec.snr_min_db = spec.snr_max_db = snr_db;
  const std::uint64_t seed = cfg.split_seed("wideband");
  std::vector<WidebandRow> rows;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    spec.frequency = freqs.size() == 1 ? 0.0 : freqs[k];
    const Dataset ds = generate_dataset(seed, spec, op, n_test, "wideband", cfg.operator_seed);
    std::vector<double> ls;
    for (Eigen::Index j = 0; j < ds.size(); ++j)
      ls.push_back(nmse(ls_estimate_cached(ds.y.col(j), op), ds.h.col(j)));
    const int kk = static_cast<int>(k) + 1;
    rows.push_back({kk, freqs[k], "FPN-OAMP", fpn_nmse_db(theta, op, ds, cfg.inference)});
    rows.push_back({kk, freqs[k], "LS", mean_nmse_db(ls)});
  }
  return rows;
}

namespace {

void put(std::ostream& os, double v) {
  if (std::isnan(v)) return;
  os << std::setprecision(10) << v;
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<NmseRow>& rows) {
  os << "snr_db,method,nmse_db,mean_iterations,wall_time\n";
  for (const auto& r : rows) {
    put(os, r.snr_db);
    os << ',' << r.method << ',';
    put(os, r.nmse_db);
    os << ',';
    put(os, r.mean_iterations);
    os << ',';
    put(os, r.wall_time);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "method,iteration,nmse_db,residual,objective\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.iteration << ',';
    put(os, r.nmse_db);
    os << ',';
    put(os, r.residual);
    os << ',';
    put(os, r.objective);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const std::vector<FarFieldRow>& rows) {
  os << "config,r,r_over_rayleigh,error_db,rayleigh\n";
  for (const auto& r : rows) {
    os << r.config << ',';
    put(os, r.r);
    os << ',';
    put(os, r.r_over_rayleigh);
    os << ',';
    put(os, r.error_db);
    os << ',';
    put(os, r.rayleigh);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const std::vector<OodRow>& rows) {
  os << "shift,family,in_dist_nmse_db,ood_nmse_db,ood_selfadapt_nmse_db\n";
  for (const auto& r : rows) {
    os << r.shift << ',' << r.family << ',';
    put(os, r.in_dist_nmse_db);
    os << ',';
    put(os, r.ood_nmse_db);
    os << ',';
    if (r.selfadapt_nmse_db) put(os, *r.selfadapt_nmse_db);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const std::vector<WidebandRow>& rows) {
  os << "k,f_k,method,nmse_db\n";
  for (const auto& r : rows) {
    os << r.k << ',';
    put(os, r.f_k);
    os << ',' << r.method << ',';
    put(os, r.nmse_db);
    os << '\n';
  }
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "linear_fit_r2: need >= 2 matching points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;
  require(sxx > 0.0, "linear_fit_r2: x values are all equal");
  return sxy * sxy / (sxx * syy);
}

}  // namespace fpn
