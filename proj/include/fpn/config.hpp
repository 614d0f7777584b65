#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpn/baselines.hpp"
#include "fpn/dataset.hpp"
#include "fpn/training.hpp"

namespace fpn {

struct WidebandConfig {
  int num_subcarriers = 32;   // K
  double bandwidth = 15e9;    // B [Hz]
  /// f_k = f_c + (k - 1 - (K - 1) / 2) B / K, k = 1..K.
  std::vector<double> frequencies(double carrier) const;
  void validate() const;
};

/// Everything a run needs. JSON keys follow the parameter names of the
/// system model (S, S_bar, d_a, d_sub, f_c, L, r_1, k_abs, n_t, sigma_rough, Q, ...).
struct RunConfig {
  std::string name = "desk";
  ArrayGeometry geometry;
  ChannelConfig channel;
  PilotConfig pilot;
  NoiseSpec noise;
  double snr_min_db = 0.0;
  double snr_max_db = 20.0;
  int n_train = 8000;
  int n_val = 500;
  int n_test = 500;
  std::uint64_t seed = 1;
  std::uint64_t operator_seed = 1;
  TrainConfig train;
  SolveOptions inference{0.01, 50, false};
  BaselineConfig baselines;
  WidebandConfig wideband;
  AdaptOptions adapt;
  std::vector<double> snr_grid{0.0, 5.0, 10.0, 15.0, 20.0};

  void validate() const;
  /// Training / validation / test sample specs at the configured SNR range.
  SampleSpec sample_spec() const;
  /// Dataset seed for a split ("train", "val", "test", or any tag).
  std::uint64_t split_seed(const std::string& split) const;
};

/// Desk scale: S = 4, S_bar = 16, Q = 8, C = 32, B = 3, 8000/500/500 samples.
RunConfig desk_config();
/// Reference scale: S = 4, S_bar = 256, Q = 64, C = 64, B = 3, 80000/5000/5000.
RunConfig paper_config();

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep the values of `base`; unknown keys are rejected.
RunConfig from_json(const nlohmann::json& j, const RunConfig& base = desk_config());
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Hex FNV-1a digest of the canonical JSON dump.
std::string config_digest(const RunConfig& cfg);

}  // namespace fpn
