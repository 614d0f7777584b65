#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "fpn/geometry.hpp"

namespace fpn {

/// Architecture of the convolutional denoiser. Inputs are 2S feature maps on
/// a sqrt(S_bar) x sqrt(S_bar) grid (real parts of every SA, then imaginary).
struct NleShape {
  int subarrays = 4;  // S
  int side = 4;       // sqrt(S_bar)
  int width = 32;     // C
  int blocks = 3;     // B
  double skip = 0.5;  // gain of the global input-to-output skip

  int in_channels() const { return 2 * subarrays; }
  int pixels() const { return side * side; }
  int dim() const { return in_channels() * pixels(); }

  static NleShape for_geometry(const ArrayGeometry& g, int width, int blocks, double skip = 0.5);
  bool operator==(const NleShape&) const = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named tensors in storage order. 3x3 kernels are [out][tap * in + in_channel]
/// stored column-major as an out x (9 in) matrix, tap = 3 * (dy + 1) + (dx + 1).
std::vector<TensorSpec> parameter_layout(const NleShape& shape);
std::size_t parameter_count(const NleShape& shape);

struct NleParameters {
  NleShape shape;
  std::vector<double> values;

  std::span<double> tensor(const std::string& name);
  std::span<const double> tensor(const std::string& name) const;
};

/// Gradients for every parameter (same layout as NleParameters::values) and
/// for the network input, one column per sample.
struct GradientBundle {
  std::vector<double> params;
  Mat input;
};

/// He-normal kernels, unit layer-norm scales, zero shifts and biases. The last
/// 1x1 kernel is zero, so the network starts as u -> skip * u.
NleParameters init_params(std::uint64_t seed, const NleShape& shape);

/// Samples are columns of `u` (dim x N) -> feature maps (2S x N*P) and back.
Mat to_feature_maps(const NleShape& shape, const Mat& u);
Mat from_feature_maps(const NleShape& shape, const Mat& maps);

/// Intermediates of one batched forward pass, consumed by the backward pass.
struct NleTape {
  struct Block {
    Mat input, cols1, xhat1, act1, cols2, xhat2;
    Vec inv_std1, inv_std2;
  };
  Eigen::Index batch = 0;
  Mat lift_cols;
  std::vector<Block> blocks;
  Mat head_in, head_pre;
};

/// Batched forward pass; each column of `u` is one input vector.
Mat nle_forward_batch(const NleParameters& theta, const Mat& u, NleTape* tape = nullptr);

/// Reverse-mode pass for the batch recorded in `tape`. Parameter gradients are
/// summed over the batch.
GradientBundle nle_backward_batch(const NleParameters& theta, const NleTape& tape,
                                  const Mat& upstream);

Vec nle_forward(const NleParameters& theta, const Vec& u);
GradientBundle nle_backward(const NleParameters& theta, const Vec& u, const Vec& upstream);

}  // namespace fpn
