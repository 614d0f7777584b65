#include "fpn/measurement.hpp"

#include <cmath>
#include <cstring>

namespace fpn {

void PilotConfig::validate(const ArrayGeometry& g) const {
  require(num_slots >= 1, "pilot: Q must be >= 1");
  const double rho = undersampling_ratio(g);
  require(rho > 0.0 && rho <= 1.0, "pilot: under-sampling ratio must lie in (0, 1]");
}

Vec MeasurementOperator::to_representation(const CVec& h_spatial) const {
  require(h_spatial.size() == F.cols(), "to_representation: length mismatch");
  return stack_real(F.adjoint() * h_spatial);
}

std::uint64_t MeasurementOperator::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const std::int64_t rows = M.rows(), cols = M.cols();
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  mix(M.data(), sizeof(double) * static_cast<std::size_t>(M.size()));
  return h;
}

CMat dft_dictionary(const ArrayGeometry& g) {
  g.validate();
  const int n = g.ae_side();
  CMat dft(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) dft(a, b) = std::polar(scale, -2.0 * kPi * a * b / n);

  const int Sb = g.antennas_per_subarray;
  CMat U(Sb, Sb);
  for (int a1 = 0; a1 < n; ++a1)
    for (int a2 = 0; a2 < n; ++a2)
      for (int b1 = 0; b1 < n; ++b1)
        for (int b2 = 0; b2 < n; ++b2) U(a1 * n + a2, b1 * n + b2) = dft(a1, b1) * dft(a2, b2);

  CMat F = CMat::Zero(g.num_antennas(), g.num_antennas());
  for (int s = 0; s < g.num_subarrays; ++s) F.block(s * Sb, s * Sb, Sb, Sb) = U;
  return F;
}

Combiners sample_combiners(Rng& rng, const ArrayGeometry& g, const PilotConfig& pilot) {
  pilot.validate(g);
  const int Sb = g.antennas_per_subarray;
  const double amp = 1.0 / std::sqrt(static_cast<double>(Sb));
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  Combiners c;
  c.slots.reserve(pilot.num_slots);
  for (int q = 0; q < pilot.num_slots; ++q) {
    CMat w(Sb, g.num_subarrays);
    for (int s = 0; s < g.num_subarrays; ++s)
      for (int i = 0; i < Sb; ++i)
        w(i, s) = pilot.resolution == CombinerResolution::one_bit
                      ? cplx(coin(rng) ? amp : -amp, 0.0)
                      : std::polar(amp, phase(rng));
    c.slots.push_back(std::move(w));
  }
  return c;
}

Mat pseudo_inverse(const Mat& A, double rel_cutoff, Eigen::Index* rank) {
  Eigen::BDCSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rel_cutoff * sv(0) : 0.0;
  Vec inv = Vec::Zero(sv.size());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) {
      inv(i) = 1.0 / sv(i);
      ++r;
    }
  if (rank) *rank = r;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MeasurementOperator build_operator(const Combiners& combiners, const CMat& F,
                                   const ArrayGeometry& g, const PilotConfig& pilot) {
  pilot.validate(g);
  const int S = g.num_subarrays;
  const int Sb = g.antennas_per_subarray;
  const int N = g.num_antennas();
  require(static_cast<int>(combiners.slots.size()) == pilot.num_slots,
          "build_operator: combiner count != Q");
  require(F.rows() == N && F.cols() == N, "build_operator: dictionary size mismatch");

  MeasurementOperator op;
  op.geometry = g;
  op.pilot = pilot;
  op.F = F;
  op.M_complex = CMat::Zero(S * pilot.num_slots, N);
  for (int q = 0; q < pilot.num_slots; ++q) {
    const CMat& w = combiners.slots[q];
    require(w.rows() == Sb && w.cols() == S, "build_operator: combiner shape mismatch");
    // Row s of W_RF,q^H F only touches the columns of subarray s.
    for (int s = 0; s < S; ++s)
      op.M_complex.block(q * S + s, 0, 1, N) = w.col(s).adjoint() * F.middleRows(s * Sb, Sb);
  }
  const Eigen::Index m = op.M_complex.rows();
  op.M.resize(2 * m, 2 * N);
  op.M << op.M_complex.real(), -op.M_complex.imag(), op.M_complex.imag(), op.M_complex.real();

  op.M_pinv = pseudo_inverse(op.M, 1e-12, &op.rank);
  // trace(M^+ M) is the numerical rank, so eta = S_bar / Q at full row rank.
  const double tr = (op.M_pinv * op.M).trace();
  op.eta = static_cast<double>(2 * N) / tr;
  op.W = op.eta * op.M_pinv;
  return op;
}

MeasurementOperator make_operator(std::uint64_t seed, const ArrayGeometry& g,
                                  const PilotConfig& pilot) {
  Rng rng = make_stream(seed, 0, 0x0b5e);
  return build_operator(sample_combiners(rng, g, pilot), dft_dictionary(g), g, pilot);
}

Vec observe(const MeasurementOperator& op, const Vec& h, const Vec& noise) {
  require(h.size() == op.channel_dim(), "observe: channel length mismatch");
  require(noise.size() == op.measurement_dim(), "observe: noise length mismatch");
  return op.M * h + noise;
}

}  // namespace fpn
