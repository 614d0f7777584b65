#pragma once

#include <cmath>
#include <vector>

#include "fpn/types.hpp"

namespace fpn {

/// Exact recovery is reported at this floor instead of -inf.
inline constexpr double kNmseFloorDb = -200.0;

inline double nmse(const Vec& estimate, const Vec& truth) {
  return (estimate - truth).squaredNorm() / truth.squaredNorm();
}

inline double to_db(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

inline double nmse_db(const Vec& estimate, const Vec& truth) {
  return to_db(nmse(estimate, truth));
}

/// Mean of per-sample NMSE values, in dB.
inline double mean_nmse_db(const std::vector<double>& per_sample_nmse) {
  if (per_sample_nmse.empty()) return kNmseFloorDb;
  double s = 0.0;
  for (double v : per_sample_nmse) s += v;
  return to_db(s / static_cast<double>(per_sample_nmse.size()));
}

}  // namespace fpn
