#pragma once

#include <optional>
#include <string>

#include "emsa/ops.hpp"

namespace emsa {

/// Weights of a NonBottleneck1D residual block: two factorized 3x3
/// convolutions (3x1 then 1x3), each pair followed by a norm. Downsampling
/// blocks stride the first pair and project the residual with a strided 1x1
/// conv + norm.
struct NBt1DWeights {
  ConvParams conv31_a, conv13_a;
  NormParams norm_a;
  ConvParams conv31_b, conv13_b;
  NormParams norm_b;
  std::optional<ConvParams> projection;
  std::optional<NormParams> projection_norm;
  // Training-time only; evaluation treats dropout as identity.
  float dropout_rate = 0.1f;

  std::size_t in_channels() const { return conv31_a.in_channels(); }
  std::size_t out_channels() const { return conv13_b.out_channels(); }
  std::size_t stride() const { return conv31_a.stride_h; }
};

/// Zero conv weights, identity norms. Stride > 1 or a channel change adds
/// the residual projection.
inline NBt1DWeights make_nbt1d(std::size_t in_c, std::size_t out_c,
                               std::size_t stride = 1) {
  NBt1DWeights w;
  w.conv31_a = make_conv(out_c, in_c, 3, 1, stride, 1);
  w.conv13_a = make_conv(out_c, out_c, 1, 3, 1, stride);
  w.norm_a = NormParams::identity(out_c);
  w.conv31_b = make_conv(out_c, out_c, 3, 1);
  w.conv13_b = make_conv(out_c, out_c, 1, 3);
  w.norm_b = NormParams::identity(out_c);
  if (stride != 1 || in_c != out_c) {
    w.projection = make_conv(out_c, in_c, 1, 1, stride, stride);
    w.projection_norm = NormParams::identity(out_c);
  }
  return w;
}

/// The residual input x' the branch is added to.
inline Tensor nbt1d_shortcut(const Tensor& x, const NBt1DWeights& w) {
  if (!w.projection) return x;
  Tensor s = conv2d(x, *w.projection);
  if (w.projection_norm) batch_norm_inplace(s, *w.projection_norm);
  return s;
}

inline Tensor nbt1d_block(const Tensor& x, const NBt1DWeights& w) {
  Tensor t = relu(conv2d(x, w.conv31_a));
  t = conv2d(t, w.conv13_a);
  batch_norm_inplace(t, w.norm_a);
  t = relu(std::move(t));
  t = relu(conv2d(t, w.conv31_b));
  t = conv2d(t, w.conv13_b);
  batch_norm_inplace(t, w.norm_b);

  Tensor shortcut = nbt1d_shortcut(x, w);
  if (shortcut.shape() != t.shape()) {
    throw ShapeError("channels", "residual " + to_string(shortcut.shape()) +
                                     " does not match branch " + to_string(t.shape()));
  }
  return relu(add(std::move(t), shortcut));
}

}  // namespace emsa
