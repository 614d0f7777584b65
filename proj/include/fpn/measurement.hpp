#pragma once

#include <vector>

#include "fpn/channel.hpp"
#include "fpn/geometry.hpp"

namespace fpn {

enum class CombinerResolution { one_bit, infinite };

struct PilotConfig {
  int num_slots = 8;  // Q
  CombinerResolution resolution = CombinerResolution::one_bit;

  /// SQ / (S S_bar).
  double undersampling_ratio(const ArrayGeometry& g) const {
    return static_cast<double>(g.num_subarrays) * num_slots / g.num_antennas();
  }
  void validate(const ArrayGeometry& g) const;
};

/// Per-slot analog combiners: slot q holds an S_bar x S matrix whose column s
/// is w_{s,q}, the phase-shifter vector of subarray s.
struct Combiners {
  std::vector<CMat> slots;
};

/// Immutable once built; safe to share across concurrent estimations.
struct MeasurementOperator {
  ArrayGeometry geometry;
  PilotConfig pilot;
  CMat F;          // blkdiag(U, ..., U), unitary
  CMat M_complex;  // SQ x S S_bar
  Mat M;           // 2SQ x 2S S_bar, [Re -Im; Im Re]
  Mat M_pinv;      // 2S S_bar x 2SQ
  Mat W;           // eta * M_pinv
  double eta = 1.0;
  Eigen::Index rank = 0;

  Eigen::Index channel_dim() const { return M.cols(); }
  Eigen::Index measurement_dim() const { return M.rows(); }

  /// Stacked real representation of F^H h_spatial, the vector M acts on.
  Vec to_representation(const CVec& h_spatial) const;
  /// FNV-1a digest of M's bytes; ties datasets to the operator they used.
  std::uint64_t digest() const;
};

/// blkdiag(U, ..., U), U = DFT_n (x) DFT_n with unitary normalization, n = sqrt(S_bar).
CMat dft_dictionary(const ArrayGeometry& g);

Combiners sample_combiners(Rng& rng, const ArrayGeometry& g, const PilotConfig& pilot);

MeasurementOperator build_operator(const Combiners& combiners, const CMat& F,
                                   const ArrayGeometry& g, const PilotConfig& pilot);

/// Combiners drawn from `seed`, then build_operator.
MeasurementOperator make_operator(std::uint64_t seed, const ArrayGeometry& g,
                                  const PilotConfig& pilot);

/// Moore-Penrose inverse through the SVD; singular values below
/// rel_cutoff * sigma_max are treated as zero.
Mat pseudo_inverse(const Mat& A, double rel_cutoff = 1e-12, Eigen::Index* rank = nullptr);

/// y = M h + n.
Vec observe(const MeasurementOperator& op, const Vec& h, const Vec& noise);

}  // namespace fpn
