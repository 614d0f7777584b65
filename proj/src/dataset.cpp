#include "fpn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "fpn/binary_io.hpp"

namespace fpn {

namespace {
constexpr char kMagic[8] = {'F', 'P', 'N', 'D', 'A', 'T', 'A', '\0'};
}

Dataset Dataset::slice(Eigen::Index first, Eigen::Index count) const {
  require(first >= 0 && count >= 0 && first + count <= size(), "dataset: slice out of range");
  Dataset out;
  out.manifest = manifest;
  out.operator_digest = operator_digest;
  out.h = h.middleCols(first, count);
  out.y = y.middleCols(first, count);
  out.snr_db.assign(snr_db.begin() + first, snr_db.begin() + first + count);
  return out;
}

DrawnSample draw_sample(std::uint64_t seed, std::uint64_t index, const SampleSpec& spec,
                        const MeasurementOperator& op) {
  Rng rng = make_stream(seed, index, 0xda7a);
  const ArrayGeometry& g = op.geometry;
  const double freq = spec.frequency > 0.0 ? spec.frequency : g.carrier;
  auto paths = sample_paths(rng, spec.channel, g);
  if (freq != g.carrier) paths = paths_at_frequency(paths, spec.channel, g, freq);

  DrawnSample out;
  out.channel = assemble_channel(paths, g, freq, spec.channel.field_mode);
  CVec spatial = out.channel.h_complex;
  if (spec.antenna_gains.size() > 0) {
    require(spec.antenna_gains.size() == spatial.size(), "antenna gain length mismatch");
    spatial = spatial.cwiseProduct(spec.antenna_gains);
  }
  out.h = op.to_representation(spatial);

  std::uniform_real_distribution<double> snr(spec.snr_min_db, spec.snr_max_db);
  out.snr_db = spec.snr_max_db > spec.snr_min_db ? snr(rng) : spec.snr_min_db;
  NoiseSpec noise = spec.noise;
  noise.snr_db = out.snr_db;
  const Vec clean = op.M * out.h;
  const double power = clean.squaredNorm() / static_cast<double>(clean.size());
  out.y = clean + sample_noise(rng, noise, power, clean.size());
  return out;
}

Dataset generate_dataset(std::uint64_t seed, const SampleSpec& spec, const MeasurementOperator& op,
                         Eigen::Index n, const std::string& split, std::uint64_t operator_seed) {
  require(n >= 1, "generate_dataset: n must be >= 1");
  Dataset ds;
  ds.h.resize(op.channel_dim(), n);
  ds.y.resize(op.measurement_dim(), n);
  ds.snr_db.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const DrawnSample s = draw_sample(seed, static_cast<std::uint64_t>(i), spec, op);
    ds.h.col(i) = s.h;
    ds.y.col(i) = s.y;
    ds.snr_db[static_cast<std::size_t>(i)] = s.snr_db;
  }
  const ArrayGeometry& g = op.geometry;
  ds.manifest = {
      {"split", split},
      {"seed", seed},
      {"operator_seed", operator_seed},
      {"geometry",
       {{"S", g.num_subarrays}, {"S_bar", g.antennas_per_subarray}, {"d_a", g.ae_spacing},
        {"d_sub", g.sa_spacing}, {"f_c", g.carrier}}},
      {"pilot",
       {{"Q", op.pilot.num_slots},
        {"combiner", op.pilot.resolution == CombinerResolution::one_bit ? "one_bit" : "infinite"}}},
      {"snr_db", {spec.snr_min_db, spec.snr_max_db}},
  };
  ds.operator_digest = op.digest();
  return ds;
}

CVec miscalibrated_gains(std::uint64_t seed, int num_antennas, double fraction, double std) {
  Rng rng = make_stream(seed, 0, 0x9a1);
  std::vector<int> idx(static_cast<std::size_t>(num_antennas));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto count = static_cast<std::size_t>(std::lround(fraction * num_antennas));
  std::normal_distribution<double> err(0.0, std);
  CVec gains = CVec::Ones(num_antennas);
  for (std::size_t k = 0; k < count; ++k) gains(idx[k]) = 1.0 + err(rng);
  return gains;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write dataset: " + path.string());
  os.write(kMagic, sizeof kMagic);
  io::put_le<std::uint32_t>(os, kDatasetVersion);
  io::put_string(os, ds.manifest.dump());
  io::put_le<std::uint64_t>(os, ds.operator_digest);
  io::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(ds.size()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.h.rows()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.y.rows()));
  for (Eigen::Index j = 0; j < ds.size(); ++j) {
    for (Eigen::Index i = 0; i < ds.h.rows(); ++i) io::put_f32(os, ds.h(i, j));
    for (Eigen::Index i = 0; i < ds.y.rows(); ++i) io::put_f32(os, ds.y(i, j));
    io::put_f32(os, ds.snr_db[static_cast<std::size_t>(j)]);
  }
  if (!os) throw std::runtime_error("failed writing dataset: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset not found: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::equal(magic, magic + 8, kMagic), "dataset: bad magic in " + path.string());
  require(io::get_le<std::uint32_t>(is) == kDatasetVersion, "dataset: unsupported version");
  Dataset ds;
  ds.manifest = nlohmann::json::parse(io::get_string(is));
  ds.operator_digest = io::get_le<std::uint64_t>(is);
  const auto n = static_cast<Eigen::Index>(io::get_le<std::uint64_t>(is));
  const auto hd = static_cast<Eigen::Index>(io::get_le<std::uint32_t>(is));
  const auto yd = static_cast<Eigen::Index>(io::get_le<std::uint32_t>(is));
  ds.h.resize(hd, n);
  ds.y.resize(yd, n);
  ds.snr_db.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < hd; ++i) ds.h(i, j) = io::get_f32(is);
    for (Eigen::Index i = 0; i < yd; ++i) ds.y(i, j) = io::get_f32(is);
    ds.snr_db[static_cast<std::size_t>(j)] = io::get_f32(is);
  }
  return ds;
}

void check_operator(const Dataset& ds, const MeasurementOperator& op) {
  require(ds.h.rows() == op.channel_dim() && ds.y.rows() == op.measurement_dim(),
          "dataset dimensions do not match the operator");
  require(ds.operator_digest == op.digest(), "dataset was generated with a different operator");
}

}  // namespace fpn
