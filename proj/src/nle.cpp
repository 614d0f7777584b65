#include "fpn/nle.hpp"

#include <cmath>

#include "fpn/channel.hpp"

namespace fpn {

namespace {

constexpr double kNormEps = 1e-5;

using MapMat = Eigen::Map<Mat>;
using ConstMapMat = Eigen::Map<const Mat>;
using MapVec = Eigen::Map<Vec>;
using ConstMapVec = Eigen::Map<const Vec>;

struct View {
  const NleParameters& p;
  const std::vector<TensorSpec>& layout;

  const double* ptr(std::size_t i) const { return p.values.data() + layout[i].offset; }
  ConstMapMat mat(std::size_t i, Eigen::Index rows) const {
    return ConstMapMat(ptr(i), rows, static_cast<Eigen::Index>(layout[i].size) / rows);
  }
  ConstMapVec vec(std::size_t i) const {
    return ConstMapVec(ptr(i), static_cast<Eigen::Index>(layout[i].size));
  }
};

// Tensor indices in parameter_layout order.
struct Index {
  static constexpr std::size_t lift_w = 0, lift_b = 1;
  static constexpr std::size_t per_block = 8;
  static std::size_t block(int b, std::size_t k) { return 2 + per_block * b + k; }
  static std::size_t head(int blocks, std::size_t k) { return 2 + per_block * blocks + k; }
};

Mat im2col(const NleShape& s, const Mat& x) {
  const Eigen::Index cin = x.rows();
  const int side = s.side, P = s.pixels();
  const Eigen::Index cols = x.cols();
  const Eigen::Index batch = cols / P;
  Mat out = Mat::Zero(9 * cin, cols);
  for (Eigen::Index n = 0; n < batch; ++n)
    for (int py = 0; py < side; ++py)
      for (int px = 0; px < side; ++px) {
        const Eigen::Index j = n * P + py * side + px;
        for (int k = 0; k < 9; ++k) {
          const int qy = py + k / 3 - 1, qx = px + k % 3 - 1;
          if (qy < 0 || qy >= side || qx < 0 || qx >= side) continue;
          out.block(k * cin, j, cin, 1) = x.col(n * P + qy * side + qx);
        }
      }
  return out;
}

void col2im_add(const NleShape& s, const Mat& dcols, Mat& dx) {
  const Eigen::Index cin = dx.rows();
  const int side = s.side, P = s.pixels();
  const Eigen::Index batch = dx.cols() / P;
  for (Eigen::Index n = 0; n < batch; ++n)
    for (int py = 0; py < side; ++py)
      for (int px = 0; px < side; ++px) {
        const Eigen::Index j = n * P + py * side + px;
        for (int k = 0; k < 9; ++k) {
          const int qy = py + k / 3 - 1, qx = px + k % 3 - 1;
          if (qy < 0 || qy >= side || qx < 0 || qx >= side) continue;
          dx.col(n * P + qy * side + qx) += dcols.block(k * cin, j, cin, 1);
        }
      }
}

// Per-sample normalization over all channels and pixels.
void layer_norm(const Mat& z, int P, const ConstMapVec& scale, const ConstMapVec& shift,
                Mat& xhat, Vec& inv_std, Mat& out) {
  const Eigen::Index batch = z.cols() / P;
  xhat.resize(z.rows(), z.cols());
  out.resize(z.rows(), z.cols());
  inv_std.resize(batch);
  for (Eigen::Index n = 0; n < batch; ++n) {
    const auto blk = z.middleCols(n * P, P);
    const double mean = blk.mean();
    const double var = (blk.array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    inv_std(n) = inv;
    xhat.middleCols(n * P, P) = (blk.array() - mean) * inv;
    out.middleCols(n * P, P) =
        (scale.asDiagonal() * xhat.middleCols(n * P, P)).colwise() + shift;
  }
}

Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv_std, int P,
                        const ConstMapVec& scale, double* dscale, double* dshift) {
  const Eigen::Index C = dy.rows();
  MapVec gs(dscale, C), gb(dshift, C);
  gs += dy.cwiseProduct(xhat).rowwise().sum();
  gb += dy.rowwise().sum();
  Mat dx(dy.rows(), dy.cols());
  const Eigen::Index batch = dy.cols() / P;
  for (Eigen::Index n = 0; n < batch; ++n) {
    const Mat dxhat = scale.asDiagonal() * dy.middleCols(n * P, P);
    const auto xh = xhat.middleCols(n * P, P);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xh).mean();
    dx.middleCols(n * P, P) = inv_std(n) * (dxhat.array() - m1 - xh.array() * m2);
  }
  return dx;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_mask(const Mat& grad, const Mat& pre) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

}  // namespace

NleShape NleShape::for_geometry(const ArrayGeometry& g, int width, int blocks, double skip) {
  g.validate();
  NleShape s;
  s.subarrays = g.num_subarrays;
  s.side = g.ae_side();
  s.width = width;
  s.blocks = blocks;
  s.skip = skip;
  require(width >= 2 * g.num_subarrays, "nle: width C must be >= 2S");
  require(blocks >= 1, "nle: block count must be >= 1");
  require(skip >= 0.0 && skip <= 1.0, "nle: skip gain must lie in [0, 1]");
  return s;
}

std::vector<TensorSpec> parameter_layout(const NleShape& s) {
  const int C = s.width, Cin = s.in_channels();
  std::vector<TensorSpec> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    out.push_back({std::move(name), std::move(dims), offset, n});
    offset += n;
  };
  add("lift.weight", {C, Cin, 3, 3});
  add("lift.bias", {C});
  for (int b = 0; b < s.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add(p + "conv1.weight", {C, C, 3, 3});
    add(p + "conv1.bias", {C});
    add(p + "norm1.scale", {C});
    add(p + "norm1.shift", {C});
    add(p + "conv2.weight", {C, C, 3, 3});
    add(p + "conv2.bias", {C});
    add(p + "norm2.scale", {C});
    add(p + "norm2.shift", {C});
  }
  add("head1.weight", {C, C});
  add("head1.bias", {C});
  add("head2.weight", {Cin, C});
  add("head2.bias", {Cin});
  return out;
}

std::size_t parameter_count(const NleShape& shape) {
  const auto layout = parameter_layout(shape);
  return layout.back().offset + layout.back().size;
}

std::span<double> NleParameters::tensor(const std::string& name) {
  for (const auto& t : parameter_layout(shape))
    if (t.name == name) return {values.data() + t.offset, t.size};
  throw InvalidInput("unknown tensor: " + name);
}

std::span<const double> NleParameters::tensor(const std::string& name) const {
  for (const auto& t : parameter_layout(shape))
    if (t.name == name) return {values.data() + t.offset, t.size};
  throw InvalidInput("unknown tensor: " + name);
}

NleParameters init_params(std::uint64_t seed, const NleShape& shape) {
  require(shape.width >= shape.in_channels(), "nle: width C must be >= 2S");
  require(shape.blocks >= 1, "nle: block count must be >= 1");
  NleParameters p;
  p.shape = shape;
  p.values.assign(parameter_count(shape), 0.0);
  Rng rng = make_stream(seed, 0, 0x11e);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& t : parameter_layout(shape)) {
    double* v = p.values.data() + t.offset;
    const bool is_weight = t.name.ends_with(".weight");
    if (t.name.ends_with(".scale")) {
      std::fill(v, v + t.size, 1.0);
    } else if (is_weight && t.name != "head2.weight") {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < t.dims.size(); ++d) fan_in *= static_cast<std::size_t>(t.dims[d]);
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < t.size; ++i) v[i] = std * gauss(rng);
    }
  }
  return p;
}

Mat to_feature_maps(const NleShape& s, const Mat& u) {
  require(u.rows() == s.dim(), "nle: input length mismatch");
  const int P = s.pixels(), Cin = s.in_channels();
  Mat out(Cin, u.cols() * P);
  for (Eigen::Index n = 0; n < u.cols(); ++n)
    for (int c = 0; c < Cin; ++c)
      for (int p = 0; p < P; ++p) out(c, n * P + p) = u(c * P + p, n);
  return out;
}

Mat from_feature_maps(const NleShape& s, const Mat& maps) {
  const int P = s.pixels(), Cin = s.in_channels();
  require(maps.rows() == Cin && maps.cols() % P == 0, "nle: feature map shape mismatch");
  const Eigen::Index batch = maps.cols() / P;
  Mat out(s.dim(), batch);
  for (Eigen::Index n = 0; n < batch; ++n)
    for (int c = 0; c < Cin; ++c)
      for (int p = 0; p < P; ++p) out(c * P + p, n) = maps(c, n * P + p);
  return out;
}

Mat nle_forward_batch(const NleParameters& theta, const Mat& u, NleTape* tape) {
  const NleShape& s = theta.shape;
  require(u.rows() == s.dim(), "nle_forward: input length mismatch");
  const auto layout = parameter_layout(s);
  const View v{theta, layout};
  const int C = s.width, P = s.pixels();

  Mat cols = im2col(s, to_feature_maps(s, u));
  Mat x = (v.mat(Index::lift_w, C) * cols).colwise() + v.vec(Index::lift_b);
  if (tape) {
    tape->batch = u.cols();
    tape->lift_cols = std::move(cols);
    tape->blocks.assign(static_cast<std::size_t>(s.blocks), {});
  }

  for (int b = 0; b < s.blocks; ++b) {
    NleTape::Block local;
    NleTape::Block& rec = tape ? tape->blocks[static_cast<std::size_t>(b)] : local;
    rec.cols1 = im2col(s, x);
    const Mat z1 = (v.mat(Index::block(b, 0), C) * rec.cols1).colwise() + v.vec(Index::block(b, 1));
    Mat y1;
    layer_norm(z1, P, v.vec(Index::block(b, 2)), v.vec(Index::block(b, 3)), rec.xhat1, rec.inv_std1, y1);
    rec.act1 = relu(y1);
    rec.cols2 = im2col(s, rec.act1);
    const Mat z2 = (v.mat(Index::block(b, 4), C) * rec.cols2).colwise() + v.vec(Index::block(b, 5));
    Mat y2;
    layer_norm(z2, P, v.vec(Index::block(b, 6)), v.vec(Index::block(b, 7)), rec.xhat2, rec.inv_std2, y2);
    x += y2;
  }

  const std::size_t h0 = Index::head(s.blocks, 0);
  Mat pre = (v.mat(h0, C) * x).colwise() + v.vec(h0 + 1);
  const Mat out = (v.mat(h0 + 2, s.in_channels()) * relu(pre)).colwise() + v.vec(h0 + 3);
  if (tape) {
    tape->head_in = std::move(x);
    tape->head_pre = std::move(pre);
  }
  return s.skip * u + from_feature_maps(s, out);
}

GradientBundle nle_backward_batch(const NleParameters& theta, const NleTape& tape,
                                  const Mat& upstream) {
  const NleShape& s = theta.shape;
  require(upstream.rows() == s.dim() && upstream.cols() == tape.batch,
          "nle_backward: upstream shape mismatch");
  require(static_cast<int>(tape.blocks.size()) == s.blocks, "nle_backward: tape mismatch");
  const auto layout = parameter_layout(s);
  const View v{theta, layout};
  const int C = s.width, P = s.pixels(), Cin = s.in_channels();

  GradientBundle g;
  g.params.assign(theta.values.size(), 0.0);
  auto gmat = [&](std::size_t i, Eigen::Index rows) {
    return MapMat(g.params.data() + layout[i].offset, rows,
                  static_cast<Eigen::Index>(layout[i].size) / rows);
  };
  auto gvec = [&](std::size_t i) {
    return MapVec(g.params.data() + layout[i].offset, static_cast<Eigen::Index>(layout[i].size));
  };

  // Head.
  const std::size_t h0 = Index::head(s.blocks, 0);
  const Mat dout = to_feature_maps(s, upstream);
  const Mat act = relu(tape.head_pre);
  gmat(h0 + 2, Cin).noalias() += dout * act.transpose();
  gvec(h0 + 3) += dout.rowwise().sum();
  const Mat dpre = relu_mask(v.mat(h0 + 2, Cin).transpose() * dout, tape.head_pre);
  gmat(h0, C).noalias() += dpre * tape.head_in.transpose();
  gvec(h0 + 1) += dpre.rowwise().sum();
  Mat dx = v.mat(h0, C).transpose() * dpre;

  // Residual blocks in reverse; the identity skip passes dx through unchanged.
  for (int b = s.blocks - 1; b >= 0; --b) {
    const NleTape::Block& rec = tape.blocks[static_cast<std::size_t>(b)];
    const Mat dz2 = layer_norm_backward(dx, rec.xhat2, rec.inv_std2, P, v.vec(Index::block(b, 6)),
                                        g.params.data() + layout[Index::block(b, 6)].offset,
                                        g.params.data() + layout[Index::block(b, 7)].offset);
    gmat(Index::block(b, 4), C).noalias() += dz2 * rec.cols2.transpose();
    gvec(Index::block(b, 5)) += dz2.rowwise().sum();
    Mat da1 = Mat::Zero(C, dx.cols());
    col2im_add(s, v.mat(Index::block(b, 4), C).transpose() * dz2, da1);
    const Mat dy1 = relu_mask(da1, rec.act1);
    const Mat dz1 = layer_norm_backward(dy1, rec.xhat1, rec.inv_std1, P, v.vec(Index::block(b, 2)),
                                        g.params.data() + layout[Index::block(b, 2)].offset,
                                        g.params.data() + layout[Index::block(b, 3)].offset);
    gmat(Index::block(b, 0), C).noalias() += dz1 * rec.cols1.transpose();
    gvec(Index::block(b, 1)) += dz1.rowwise().sum();
    col2im_add(s, v.mat(Index::block(b, 0), C).transpose() * dz1, dx);
  }

  // Lift.
  gmat(Index::lift_w, C).noalias() += dx * tape.lift_cols.transpose();
  gvec(Index::lift_b) += dx.rowwise().sum();
  Mat dx0 = Mat::Zero(Cin, dx.cols());
  col2im_add(s, v.mat(Index::lift_w, C).transpose() * dx, dx0);
  g.input = s.skip * upstream + from_feature_maps(s, dx0);
  return g;
}

Vec nle_forward(const NleParameters& theta, const Vec& u) {
  return nle_forward_batch(theta, u);
}

GradientBundle nle_backward(const NleParameters& theta, const Vec& u, const Vec& upstream) {
  require(upstream.size() == u.size(), "nle_backward: upstream length mismatch");
  NleTape tape;
  nle_forward_batch(theta, u, &tape);
  return nle_backward_batch(theta, tape, upstream);
}

}  // namespace fpn
