#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpn/measurement.hpp"
#include "fpn/noise.hpp"

namespace fpn {

inline constexpr int kDatasetVersion = 1;

/// How channel samples and observations are drawn.
struct SampleSpec {
  ChannelConfig channel;
  NoiseSpec noise;          // snr_db is replaced by the per-sample draw
  double snr_min_db = 0.0;  // per-sample SNR ~ U(snr_min, snr_max)
  double snr_max_db = 20.0;
  double frequency = 0.0;   // 0 = geometry carrier
  /// Per-antenna gains applied to the spatial channel (array miscalibration);
  /// empty means a perfect array.
  CVec antenna_gains;
};

/// Columns of h and y are samples. h lives in the dictionary domain M acts on.
struct Dataset {
  nlohmann::json manifest;  // geometry, pilot, operator seed, split, ...
  std::uint64_t operator_digest = 0;
  Mat h;
  Mat y;
  std::vector<double> snr_db;

  Eigen::Index size() const { return h.cols(); }
  /// Columns [first, first + count) as a new dataset.
  Dataset slice(Eigen::Index first, Eigen::Index count) const;
};

/// One channel realization in the dictionary domain and its observation.
struct DrawnSample {
  ChannelSample channel;
  Vec h;
  Vec y;
  double snr_db = 0.0;
};

/// Deterministic in (seed, index) regardless of generation order.
DrawnSample draw_sample(std::uint64_t seed, std::uint64_t index, const SampleSpec& spec,
                        const MeasurementOperator& op);

Dataset generate_dataset(std::uint64_t seed, const SampleSpec& spec, const MeasurementOperator& op,
                         Eigen::Index n, const std::string& split = "train",
                         std::uint64_t operator_seed = 0);

/// Picks round(fraction * N) antennas and sets their gain to 1 + e, e ~ N(0, std^2).
CVec miscalibrated_gains(std::uint64_t seed, int num_antennas, double fraction, double std);

/// Binary layout: magic "FPNDATA\0", u32 version, JSON manifest, u64 operator
/// digest, u64 sample count, u32 h length, u32 y length, then per sample
/// h, y, snr_db as little-endian float32.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// Throws when `ds` was not generated with `op`.
void check_operator(const Dataset& ds, const MeasurementOperator& op);

}  // namespace fpn
