#pragma once

// Forward-only primitives: convolution, normalization, pooling, activations,
// affine layers and resampling. Images are CxHxW or NxCxHxW.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "emsa/tensor.hpp"

namespace emsa {

/// Cross-correlation weights (Cout x Cin x Kh x Kw) plus geometry.
struct ConvParams {
  Tensor weight;
  std::vector<float> bias;  // empty: no bias
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_h() const { return weight.dim(2); }
  std::size_t kernel_w() const { return weight.dim(3); }

  std::size_t out_h(std::size_t h) const {
    return (h + 2 * pad_h - kernel_h()) / stride_h + 1;
  }
  std::size_t out_w(std::size_t w) const {
    return (w + 2 * pad_w - kernel_w()) / stride_w + 1;
  }
};

/// Zero weights for a kh x kw kernel with "same" padding at stride 1.
inline ConvParams make_conv(std::size_t out_c, std::size_t in_c, std::size_t kh,
                            std::size_t kw, std::size_t stride_h = 1,
                            std::size_t stride_w = 1) {
  ConvParams p;
  p.weight = Tensor({out_c, in_c, kh, kw});
  p.stride_h = stride_h;
  p.stride_w = stride_w;
  p.pad_h = kh / 2;
  p.pad_w = kw / 2;
  return p;
}

/// Inference-mode batch normalization.
struct NormParams {
  std::vector<float> gamma, beta, mean, var;
  float eps = 1e-5f;

  static NormParams identity(std::size_t channels) {
    return {std::vector<float>(channels, 1.0f), std::vector<float>(channels, 0.0f),
            std::vector<float>(channels, 0.0f), std::vector<float>(channels, 1.0f),
            1e-5f};
  }
  std::size_t channels() const { return gamma.size(); }
};

inline Tensor conv2d(const Tensor& x, const ConvParams& p) {
  require_image(x, "conv2d input");
  if (p.weight.rank() != 4) throw ShapeError("kernel", "conv weight must be rank 4");
  if (x.channels() != p.in_channels()) {
    throw ShapeError("channels", "input has " + std::to_string(x.channels()) +
                                     " channels, kernel expects " +
                                     std::to_string(p.in_channels()));
  }
  if (!p.bias.empty() && p.bias.size() != p.out_channels()) {
    throw ShapeError("bias", "bias length does not match out channels");
  }
  if (p.stride_h == 0 || p.stride_w == 0) throw ShapeError("stride", "stride must be >= 1");
  const std::size_t H = x.height(), W = x.width();
  if (H + 2 * p.pad_h < p.kernel_h()) throw ShapeError("height", "kernel taller than padded input");
  if (W + 2 * p.pad_w < p.kernel_w()) throw ShapeError("width", "kernel wider than padded input");

  const std::size_t Ho = p.out_h(H), Wo = p.out_w(W);
  const std::size_t Cin = p.in_channels(), Cout = p.out_channels();
  const std::size_t KH = p.kernel_h(), KW = p.kernel_w();
  Tensor y(image_shape(x, Cout, Ho, Wo));
  const std::size_t N = x.batch();
  const auto sh = static_cast<std::ptrdiff_t>(p.stride_h);
  const auto sw = static_cast<std::ptrdiff_t>(p.stride_w);
  const auto ph = static_cast<std::ptrdiff_t>(p.pad_h);
  const auto pw = static_cast<std::ptrdiff_t>(p.pad_w);

  parallel_for(N * Cout, [&](std::size_t job) {
    const std::size_t n = job / Cout, oc = job % Cout;
    float* out = y.plane(n, oc).data();
    std::fill_n(out, Ho * Wo, p.bias.empty() ? 0.0f : p.bias[oc]);
    for (std::size_t ic = 0; ic < Cin; ++ic) {
      const float* in = x.plane(n, ic).data();
      for (std::size_t kh = 0; kh < KH; ++kh) {
        for (std::size_t kw = 0; kw < KW; ++kw) {
          const float w = p.weight[((oc * Cin + ic) * KH + kh) * KW + kw];
          if (w == 0.0f) continue;
          const auto dx = static_cast<std::ptrdiff_t>(kw) - pw;
          // valid ox: 0 <= ox*sw + dx < W
          std::ptrdiff_t ox_lo = dx >= 0 ? 0 : (-dx + sw - 1) / sw;
          std::ptrdiff_t ox_hi = (static_cast<std::ptrdiff_t>(W) - 1 - dx);
          ox_hi = ox_hi < 0 ? -1 : std::min<std::ptrdiff_t>(ox_hi / sw, Wo - 1);
          if (ox_lo > ox_hi) continue;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy) * sh +
                            static_cast<std::ptrdiff_t>(kh) - ph;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const float* row = in + iy * static_cast<std::ptrdiff_t>(W) + dx;
            float* orow = out + oy * Wo;
            if (sw == 1) {
              for (std::ptrdiff_t ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w * row[ox];
            } else {
              for (std::ptrdiff_t ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w * row[ox * sw];
            }
          }
        }
      }
    }
  });
  return y;
}

/// 3x1 followed by 1x3 convolution.
inline Tensor factorized_conv3(const Tensor& x, const ConvParams& p31,
                               const ConvParams& p13) {
  if (p31.weight.rank() != 4 || p31.kernel_h() != 3 || p31.kernel_w() != 1) {
    throw ShapeError("kernel", "first factor must be a 3x1 kernel");
  }
  if (p13.weight.rank() != 4 || p13.kernel_h() != 1 || p13.kernel_w() != 3) {
    throw ShapeError("kernel", "second factor must be a 1x3 kernel");
  }
  return conv2d(conv2d(x, p31), p13);
}

inline void batch_norm_inplace(Tensor& x, const NormParams& p) {
  require_image(x, "batch_norm input");
  if (p.channels() != x.channels()) {
    throw ShapeError("channels", "norm has " + std::to_string(p.channels()) +
                                     " channels, input has " +
                                     std::to_string(x.channels()));
  }
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const float scale = p.gamma[c] / std::sqrt(p.var[c] + p.eps);
      const float shift = p.beta[c] - p.mean[c] * scale;
      for (float& v : x.plane(n, c)) v = v * scale + shift;
    }
  }
}

inline Tensor batch_norm(Tensor x, const NormParams& p) {
  batch_norm_inplace(x, p);
  return x;
}

// Activations

inline Tensor relu(Tensor x) {
  for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
  return x;
}

inline float sigmoid(float v) {
  // Split by sign so exp never overflows.
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}

inline Tensor sigmoid(Tensor x) {
  for (float& v : x.data()) v = sigmoid(v);
  return x;
}

inline Tensor tanh(Tensor x) {
  for (float& v : x.data()) v = std::tanh(v);
  return x;
}

inline Tensor softmax(Tensor x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("axis", "softmax axis " + std::to_string(axis) +
                                 " out of range for rank " + std::to_string(x.rank()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      float* base = x.raw() + o * n * inner + i;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, base[k * inner]);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        base[k * inner] = std::exp(base[k * inner] - mx);
        sum += base[k * inner];
      }
      for (std::size_t k = 0; k < n; ++k) {
        base[k * inner] = static_cast<float>(base[k * inner] / sum);
      }
    }
  }
  return x;
}

// Pooling

enum class PoolKind { max, avg };

/// Window pooling. Max pooling pads with -inf, average pooling counts only
/// in-bounds elements.
inline Tensor pool2d(const Tensor& x, PoolKind kind, std::size_t window,
                     std::size_t stride, std::size_t pad = 0) {
  require_image(x, "pool2d input");
  if (window == 0 || stride == 0) throw ShapeError("window", "window and stride must be >= 1");
  if (window > x.height() + 2 * pad || window > x.width() + 2 * pad) {
    throw ShapeError("window", "pool window " + std::to_string(window) +
                                   " exceeds spatial extents " +
                                   to_string(x.shape()));
  }
  const std::size_t H = x.height(), W = x.width();
  const std::size_t Ho = (H + 2 * pad - window) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - window) / stride + 1;
  Tensor y(image_shape(x, x.channels(), Ho, Wo));
  const auto P = static_cast<std::ptrdiff_t>(pad);
  parallel_for(x.batch() * x.channels(), [&](std::size_t job) {
    const std::size_t n = job / x.channels(), c = job % x.channels();
    const float* in = x.plane(n, c).data();
    float* out = y.plane(n, c).data();
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * stride) - P;
      const std::ptrdiff_t ylo = std::max<std::ptrdiff_t>(y0, 0);
      const std::ptrdiff_t yhi = std::min<std::ptrdiff_t>(y0 + window, H);
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * stride) - P;
        const std::ptrdiff_t xlo = std::max<std::ptrdiff_t>(x0, 0);
        const std::ptrdiff_t xhi = std::min<std::ptrdiff_t>(x0 + window, W);
        float acc = kind == PoolKind::max ? -std::numeric_limits<float>::infinity() : 0.0f;
        for (std::ptrdiff_t iy = ylo; iy < yhi; ++iy) {
          for (std::ptrdiff_t ix = xlo; ix < xhi; ++ix) {
            const float v = in[iy * static_cast<std::ptrdiff_t>(W) + ix];
            acc = kind == PoolKind::max ? std::max(acc, v) : acc + v;
          }
        }
        if (kind == PoolKind::avg) acc /= static_cast<float>((yhi - ylo) * (xhi - xlo));
        out[oy * Wo + ox] = acc;
      }
    }
  });
  return y;
}

/// Adaptive average pooling to out_h x out_w bins (bin i spans
/// [floor(i*H/out), ceil((i+1)*H/out)) ).
inline Tensor adaptive_avg_pool(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_image(x, "adaptive_avg_pool input");
  const std::size_t H = x.height(), W = x.width();
  if (out_h == 0 || out_w == 0 || out_h > H || out_w > W) {
    throw ShapeError("window", "adaptive pool output larger than input");
  }
  Tensor y(image_shape(x, x.channels(), out_h, out_w));
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const float* in = x.plane(n, c).data();
      float* out = y.plane(n, c).data();
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const std::size_t y0 = oy * H / out_h, y1 = ((oy + 1) * H + out_h - 1) / out_h;
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const std::size_t x0 = ox * W / out_w, x1 = ((ox + 1) * W + out_w - 1) / out_w;
          double acc = 0.0;
          for (std::size_t iy = y0; iy < y1; ++iy)
            for (std::size_t ix = x0; ix < x1; ++ix) acc += in[iy * W + ix];
          out[oy * out_w + ox] = static_cast<float>(acc / double((y1 - y0) * (x1 - x0)));
        }
      }
    }
  }
  return y;
}

inline Tensor global_avg_pool(const Tensor& x) { return adaptive_avg_pool(x, 1, 1); }

/// y = W x + b, with x flattened. `w` is out x in.
inline Tensor fully_connected(const Tensor& x, const Tensor& w, std::span<const float> b) {
  if (w.rank() != 2) throw ShapeError("weight", "fully-connected weight must be rank 2");
  const std::size_t out = w.dim(0), in = w.dim(1);
  if (x.size() != in) {
    throw ShapeError("features", "input has " + std::to_string(x.size()) +
                                     " features, weight expects " + std::to_string(in));
  }
  if (!b.empty() && b.size() != out) throw ShapeError("bias", "bias length mismatch");
  Tensor y({out});
  for (std::size_t o = 0; o < out; ++o) {
    double acc = b.empty() ? 0.0 : b[o];
    for (std::size_t i = 0; i < in; ++i) acc += double(w[o * in + i]) * x[i];
    y[o] = static_cast<float>(acc);
  }
  return y;
}

// Learned x2 upsampling: per-channel 4x4 transposed convolution, stride 2,
// padding 1, with edge-replicated input. With the bilinear kernel
// [1,3,3,1]/4 (outer product) it reproduces half-pixel bilinear upsampling.

struct UpsampleParams {
  Tensor kernel;  // C x 4 x 4

  std::size_t channels() const { return kernel.dim(0); }
};

inline UpsampleParams bilinear_upsample_params(std::size_t channels) {
  constexpr float k1[4] = {0.25f, 0.75f, 0.75f, 0.25f};
  UpsampleParams p{Tensor({channels, 4, 4})};
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) p.kernel[(c * 4 + i) * 4 + j] = k1[i] * k1[j];
  return p;
}

inline Tensor learned_upsample(const Tensor& x, const UpsampleParams& p) {
  require_image(x, "learned_upsample input");
  if (p.kernel.rank() != 3 || p.kernel.dim(1) != 4 || p.kernel.dim(2) != 4) {
    throw ShapeError("kernel", "upsample kernel must be C x 4 x 4");
  }
  if (p.channels() != x.channels()) {
    throw ShapeError("channels", "upsample kernel has " + std::to_string(p.channels()) +
                                     " channels, input has " +
                                     std::to_string(x.channels()));
  }
  const auto H = static_cast<std::ptrdiff_t>(x.height());
  const auto W = static_cast<std::ptrdiff_t>(x.width());
  Tensor y(image_shape(x, x.channels(), 2 * H, 2 * W));
  parallel_for(x.batch() * x.channels(), [&](std::size_t job) {
    const std::size_t n = job / x.channels(), c = job % x.channels();
    const float* in = x.plane(n, c).data();
    const float* k = p.kernel.raw() + c * 16;
    float* out = y.plane(n, c).data();
    for (std::ptrdiff_t oy = 0; oy < 2 * H; ++oy) {
      // taps: ky = oy + 1 - 2*iy in [0,4)
      const std::ptrdiff_t iy_hi = (oy + 1) / 2;
      for (std::ptrdiff_t ox = 0; ox < 2 * W; ++ox) {
        const std::ptrdiff_t ix_hi = (ox + 1) / 2;
        float acc = 0.0f;
        for (std::ptrdiff_t iy = iy_hi - 1; iy <= iy_hi; ++iy) {
          const std::ptrdiff_t ky = oy + 1 - 2 * iy;
          const std::ptrdiff_t cy = std::clamp<std::ptrdiff_t>(iy, 0, H - 1);
          for (std::ptrdiff_t ix = ix_hi - 1; ix <= ix_hi; ++ix) {
            const std::ptrdiff_t kx = ox + 1 - 2 * ix;
            const std::ptrdiff_t cx = std::clamp<std::ptrdiff_t>(ix, 0, W - 1);
            acc += k[ky * 4 + kx] * in[cy * W + cx];
          }
        }
        out[oy * 2 * W + ox] = acc;
      }
    }
  });
  return y;
}

// Resampling

/// Half-pixel bilinear resize (align_corners = false), edge-clamped.
inline Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_image(x, "resize_bilinear input");
  const std::size_t H = x.height(), W = x.width();
  Tensor y(image_shape(x, x.channels(), out_h, out_w));
  auto axis = [](std::size_t o, std::size_t in, std::size_t out) {
    double src = (o + 0.5) * double(in) / double(out) - 0.5;
    src = std::max(src, 0.0);
    auto i0 = std::min(static_cast<std::size_t>(src), in - 1);
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    return std::tuple{i0, i1, static_cast<float>(src - double(i0))};
  };
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const float* in = x.plane(n, c).data();
      float* out = y.plane(n, c).data();
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const auto [y0, y1, fy] = axis(oy, H, out_h);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const auto [x0, x1, fx] = axis(ox, W, out_w);
          const float top = in[y0 * W + x0] * (1 - fx) + in[y0 * W + x1] * fx;
          const float bot = in[y1 * W + x0] * (1 - fx) + in[y1 * W + x1] * fx;
          out[oy * out_w + ox] = top * (1 - fy) + bot * fy;
        }
      }
    }
  }
  return y;
}

// Elementwise / structural helpers

inline Tensor add(Tensor a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape", "cannot add " + to_string(a.shape()) + " and " +
                                  to_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("channels", "nothing to concatenate");
  const Tensor& first = *parts.front();
  std::size_t channels = 0;
  for (const Tensor* t : parts) {
    if (t->rank() != first.rank() || t->batch() != first.batch() ||
        t->height() != first.height() || t->width() != first.width()) {
      throw ShapeError("spatial", "concat operands disagree on spatial extents");
    }
    channels += t->channels();
  }
  Tensor y(image_shape(first, channels, first.height(), first.width()));
  for (std::size_t n = 0; n < first.batch(); ++n) {
    std::size_t c0 = 0;
    for (const Tensor* t : parts) {
      for (std::size_t c = 0; c < t->channels(); ++c) {
        std::ranges::copy(t->plane(n, c), y.plane(n, c0 + c).begin());
      }
      c0 += t->channels();
    }
  }
  return y;
}

/// Scales each pixel's channel vector to unit L2 norm; zero vectors map to
/// the first basis vector.
inline Tensor l2_normalize_channels(Tensor x) {
  require_image(x, "l2_normalize_channels input");
  const std::size_t hw = x.height() * x.width();
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      double sq = 0.0;
      for (std::size_t c = 0; c < x.channels(); ++c) sq += double(x.plane(n, c)[i]) * x.plane(n, c)[i];
      const double norm = std::sqrt(sq);
      for (std::size_t c = 0; c < x.channels(); ++c) {
        float& v = x.plane(n, c)[i];
        if (norm > 0.0 && std::isfinite(norm)) {
          v = static_cast<float>(v / norm);
        } else {
          v = c == 0 ? 1.0f : 0.0f;
        }
      }
    }
  }
  return x;
}

}  // namespace emsa
