#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <stdexcept>

#include "fpn/checkpoint.hpp"
#include "fpn/experiments.hpp"

namespace fs = std::filesystem;
using namespace fpn;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  bool deterministic = false;
};

RunConfig load(const Globals& g) {
  RunConfig cfg = g.config.empty() ? desk_config() : load_config(g.config);
  if (g.seed_set) {
    cfg.seed = g.seed;
    cfg.train.seed = g.seed;
  }
  return cfg;
}

fs::path out_dir(const Globals& g) {
  fs::create_directories(g.out);
  return g.out;
}

void write_manifest(const Globals& g, const RunConfig& cfg, const std::string& command,
                    const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j{{"command", command},
                   {"version", kVersion},
                   {"config_digest", config_digest(cfg)},
                   {"seed", cfg.seed},
                   {"operator_seed", cfg.operator_seed},
                   {"deterministic", g.deterministic},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"config", to_json(cfg)}};
  j.update(extra);
  std::ofstream(out_dir(g) / (command + "_manifest.json")) << j.dump(2) << '\n';
}

NleParameters checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
  return load_checkpoint(path);
}

template <class Rows>
void csv(const Globals& g, const std::string& name, const Rows& rows) {
  const fs::path p = out_dir(g) / name;
  std::ofstream os(p);
  write_csv(os, rows);
  std::cout << "wrote " << p.string() << '\n';
}

Dataset load_or_generate(const RunConfig& cfg, const MeasurementOperator& op,
                         const fs::path& dir, const std::string& split, int n) {
  const fs::path p = dir / (split + ".fpnd");
  if (fs::exists(p)) {
    Dataset ds = load_dataset(p);
    check_operator(ds, op);
    return ds;
  }
  return generate_dataset(cfg.split_seed(split), cfg.sample_spec(), op, n, split,
                          cfg.operator_seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FPN-OAMP channel estimation experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run config (default: built-in desk config)");
  app.add_option_function<std::uint64_t>(
      "--seed", [&g](std::uint64_t s) { g.seed = s, g.seed_set = true; }, "Master seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Fixed-order aggregation, zero wall times");

  std::string ckpt = "out/model.ckpt";
  std::string data_dir;
  int epochs = 0, n_test = 0, iters = 20, ref_epochs = 3, ref_samples = 2000;
  double snr = 10.0, rho = 0.3;
  bool dump_config = false;

  auto* gen = app.add_subcommand("gen-data", "Generate train/val/test datasets");
  gen->add_flag("--dump-config", dump_config, "Also write the effective config");

  auto* tr = app.add_subcommand("train", "Train the NLE with one-step gradients");
  tr->add_option("--data", data_dir, "Dataset directory (default: --out)");
  tr->add_option("--epochs", epochs, "Override the configured epoch count");
  std::string init;
  tr->add_option("--init", init, "Warm-start checkpoint");

  auto* ev = app.add_subcommand("eval", "NMSE versus SNR for all estimators");
  ev->add_option("--checkpoint", ckpt)->capture_default_str();
  ev->add_option("--n-test", n_test, "Samples per SNR point (default: config)");

  auto* trc = app.add_subcommand("trace", "Per-iteration NMSE and residual traces");
  trc->add_option("--checkpoint", ckpt)->capture_default_str();
  trc->add_option("--snr", snr)->capture_default_str();
  trc->add_option("--iters", iters)->capture_default_str();
  trc->add_option("--n-test", n_test);

  auto* f2 = app.add_subcommand("fig2", "Far-field approximation error versus distance");

  auto* ood = app.add_subcommand("ood", "Out-of-distribution suite");
  ood->add_option("--checkpoint", ckpt)->capture_default_str();
  ood->add_option("--n-test", n_test);
  ood->add_option("--ref-epochs", ref_epochs, "Fine-tuning epochs of in-distribution references")
      ->capture_default_str();
  ood->add_option("--ref-samples", ref_samples)->capture_default_str();
  std::vector<std::string> only;
  ood->add_option("--only", only, "Run only these shift ids");

  auto* wb = app.add_subcommand("wideband", "Per-subcarrier NMSE of the narrowband model");
  wb->add_option("--checkpoint", ckpt)->capture_default_str();
  wb->add_option("--snr", snr)->capture_default_str();
  wb->add_option("--n-test", n_test);

  auto* ad = app.add_subcommand("adapt", "Self-adaptation under an under-sampling shift");
  ad->add_option("--checkpoint", ckpt)->capture_default_str();
  ad->add_option("--rho", rho, "Target under-sampling ratio")->capture_default_str();
  ad->add_option("--snr", snr)->capture_default_str();
  ad->add_option("--n-test", n_test);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load(g);
    const int nt = n_test > 0 ? n_test : cfg.n_test;

    if (gen->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      const fs::path dir = out_dir(g);
      const std::pair<std::string, int> splits[] = {
          {"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
      for (const auto& [split, n] : splits) {
        save_dataset(dir / (split + ".fpnd"),
                     generate_dataset(cfg.split_seed(split), cfg.sample_spec(), op, n, split,
                                      cfg.operator_seed));
        std::cout << "wrote " << (dir / (split + ".fpnd")).string() << '\n';
      }
      if (dump_config) save_config(dir / "config.json", cfg);
      write_manifest(g, cfg, "gen-data");
    } else if (tr->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      const fs::path dir = data_dir.empty() ? out_dir(g) : fs::path(data_dir);
      const Dataset train_set = load_or_generate(cfg, op, dir, "train", cfg.n_train);
      const Dataset val_set = load_or_generate(cfg, op, dir, "val", cfg.n_val);
      TrainConfig tc = cfg.train;
      if (epochs > 0) tc.epochs = epochs;
      std::optional<NleParameters> start;
      if (!init.empty()) start = checkpoint(init);
      std::ofstream log(out_dir(g) / "train_log.jsonl");
      const TrainResult r = train(tc, train_set, val_set, op, start ? &*start : nullptr,
                                  [&log](const EpochLog& e) {
                                    log << to_json(e).dump() << '\n' << std::flush;
                                    std::cout << "epoch " << e.epoch << " loss " << e.train_loss
                                              << " val " << e.val_nmse_db << " dB L "
                                              << e.lipschitz << '\n';
                                  });
      save_checkpoint(out_dir(g) / "model.ckpt", r.theta);
      write_manifest(g, cfg, "train",
                     {{"best_epoch", r.best_epoch}, {"final_lipschitz", r.final_lipschitz}});
      std::cout << "best epoch " << r.best_epoch << ", L " << r.final_lipschitz << '\n';
    } else if (ev->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      const NleParameters theta = checkpoint(ckpt);
      csv(g, "nmse.csv",
          eval_nmse(cfg, op, standard_estimators(cfg, op, &theta), cfg.snr_grid, nt,
                    g.deterministic));
      write_manifest(g, cfg, "eval", {{"checkpoint", ckpt}});
    } else if (trc->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      const NleParameters theta = checkpoint(ckpt);
      csv(g, "trace.csv", convergence_trace(cfg, op, theta, snr, nt, iters));
      const Dataset ds = make_test_set(cfg, op, snr, nt, "trace");
      std::ofstream os(out_dir(g) / "residuals.csv");
      os << "sample,iteration,residual,relative_residual\n";
      const auto traces = residual_traces(theta, op, ds.y, cfg.inference);
      for (std::size_t j = 0; j < traces.size(); ++j)
        for (std::size_t t = 0; t < traces[j].size(); ++t)
          os << j << ',' << t + 1 << ',' << traces[j][t] << ',' << traces[j][t] / traces[j][0]
             << '\n';
      write_manifest(g, cfg, "trace", {{"checkpoint", ckpt}, {"snr_db", snr}});
    } else if (f2->parsed()) {
      csv(g, "fig2.csv",
          farfield_error_curve({{cfg.name, cfg.geometry}, {"paper", paper_config().geometry}},
                               log_grid(0.01, 100.0, 41)));
      write_manifest(g, cfg, "fig2");
    } else if (ood->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      const NleParameters theta = checkpoint(ckpt);
      std::vector<OodRow> rows;
      for (const OodShift& s : standard_shifts(cfg)) {
        if (!only.empty() && std::find(only.begin(), only.end(), s.id) == only.end()) continue;
        std::cout << "shift " << s.id << std::endl;
        const bool needs_ref = s.family != "noise" && !s.fresh_operators;
        rows.push_back(run_shift(cfg, op, theta, s, nt, [&](const OodShift& sh) {
          return needs_ref ? std::optional(finetune_for_shift(cfg, theta, sh, ref_epochs,
                                                              ref_samples))
                           : std::nullopt;
        }));
      }
      csv(g, "ood.csv", rows);
      write_manifest(g, cfg, "ood", {{"checkpoint", ckpt}, {"ref_epochs", ref_epochs}});
    } else if (wb->parsed()) {
      const MeasurementOperator op = config_operator(cfg);
      csv(g, "wideband.csv", wideband_eval(cfg, op, checkpoint(ckpt), snr, nt));
      write_manifest(g, cfg, "wideband", {{"checkpoint", ckpt}, {"snr_db", snr}});
    } else if (ad->parsed()) {
      const NleParameters theta = checkpoint(ckpt);
      RunConfig target = cfg;
      target.pilot.num_slots = std::max(
          1, static_cast<int>(std::lround(rho * cfg.geometry.antennas_per_subarray)));
      target.validate();
      const MeasurementOperator op = config_operator(target);
      const Dataset ds = make_test_set(target, op, snr, nt, "adapt");
      std::ofstream os(out_dir(g) / "adapt.csv");
      os << "sample,step,aux_loss,nmse_before_db,nmse_after_db\n";
      for (Eigen::Index j = 0; j < ds.size(); ++j) {
        const Vec y = ds.y.col(j), h = ds.h.col(j);
        std::vector<double> aux;
        const NleParameters tuned = self_adapt(theta, op, y, cfg.adapt, &aux);
        const double before = nmse_db(fixed_point_solve(theta, op, y, cfg.inference).h_star, h);
        const double after = nmse_db(fixed_point_solve(tuned, op, y, cfg.inference).h_star, h);
        for (std::size_t t = 0; t < aux.size(); ++t)
          os << j << ',' << t << ',' << aux[t] << ',' << before << ',' << after << '\n';
      }
      std::cout << "wrote " << (out_dir(g) / "adapt.csv").string() << '\n';
      write_manifest(g, cfg, "adapt", {{"checkpoint", ckpt}, {"rho", rho}, {"snr_db", snr}});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
