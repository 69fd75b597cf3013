#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code paths with the library beyond the plain data containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "emsa/emsa.hpp"

namespace oracle {

using emsa::LabelMap;
using emsa::Tensor;

/// Seven nested loops over (n, oc, oy, ox, ic, ky, kx), double accumulation.
inline Tensor conv2d(const Tensor& x, const emsa::ConvParams& p) {
  const std::size_t N = x.rank() == 4 ? x.dim(0) : 1;
  const std::size_t C = x.dim(x.rank() - 3), H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
  const std::size_t OC = p.weight.dim(0), KH = p.weight.dim(2), KW = p.weight.dim(3);
  const std::size_t OH = (H + 2 * p.pad_h - KH) / p.stride_h + 1;
  const std::size_t OW = (W + 2 * p.pad_w - KW) / p.stride_w + 1;
  emsa::Shape shape = x.rank() == 4 ? emsa::Shape{N, OC, OH, OW} : emsa::Shape{OC, OH, OW};
  Tensor y(shape);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t oc = 0; oc < OC; ++oc)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = p.bias.empty() ? 0.0 : p.bias[oc];
          for (std::size_t ic = 0; ic < C; ++ic)
            for (std::size_t ky = 0; ky < KH; ++ky)
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const long iy = long(oy * p.stride_h + ky) - long(p.pad_h);
                const long ix = long(ox * p.stride_w + kx) - long(p.pad_w);
                if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
                acc += double(p.weight[((oc * C + ic) * KH + ky) * KW + kx]) *
                       double(x[((n * C + ic) * H + std::size_t(iy)) * W + std::size_t(ix)]);
              }
          y[((n * OC + oc) * OH + oy) * OW + ox] = static_cast<float>(acc);
        }
  return y;
}

/// Window pooling without padding.
inline Tensor pool2d(const Tensor& x, bool max_pool, std::size_t window, std::size_t stride) {
  const std::size_t C = x.dim(x.rank() - 3), H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
  const std::size_t N = x.rank() == 4 ? x.dim(0) : 1;
  const std::size_t OH = (H - window) / stride + 1, OW = (W - window) / stride + 1;
  Tensor y(x.rank() == 4 ? emsa::Shape{N, C, OH, OW} : emsa::Shape{C, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = max_pool ? -1e300 : 0.0;
          for (std::size_t ky = 0; ky < window; ++ky)
            for (std::size_t kx = 0; kx < window; ++kx) {
              const double v = x[((n * C + c) * H + oy * stride + ky) * W + ox * stride + kx];
              acc = max_pool ? std::max(acc, v) : acc + v;
            }
          if (!max_pool) acc /= double(window * window);
          y[((n * C + c) * OH + oy) * OW + ox] = static_cast<float>(acc);
        }
  return y;
}

inline std::vector<double> matvec(const Tensor& w, const Tensor& x, const std::vector<float>& b) {
  std::vector<double> y(w.dim(0));
  for (std::size_t o = 0; o < w.dim(0); ++o) {
    y[o] = b.empty() ? 0.0 : b[o];
    for (std::size_t i = 0; i < w.dim(1); ++i) y[o] += double(w[o * w.dim(1) + i]) * x[i];
  }
  return y;
}

/// Closed-form x2 bilinear interpolation with half-pixel centers and
/// clamped borders: sample position (o + 0.5) / 2 - 0.5.
inline Tensor bilinear_up2(const Tensor& x) {
  const std::size_t C = x.dim(x.rank() - 3), H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
  const std::size_t N = x.rank() == 4 ? x.dim(0) : 1;
  Tensor y(x.rank() == 4 ? emsa::Shape{N, C, 2 * H, 2 * W} : emsa::Shape{C, 2 * H, 2 * W});
  auto sample = [](std::size_t o, std::size_t n) {
    const double s = std::clamp((double(o) + 0.5) / 2.0 - 0.5, 0.0, double(n - 1));
    const double f = std::floor(s);
    return std::tuple{std::size_t(f), std::min(std::size_t(f) + 1, n - 1), s - f};
  };
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const float* in = x.raw() + (n * C + c) * H * W;
      for (std::size_t oy = 0; oy < 2 * H; ++oy) {
        auto [y0, y1, fy] = sample(oy, H);
        for (std::size_t ox = 0; ox < 2 * W; ++ox) {
          auto [x0, x1, fx] = sample(ox, W);
          const double v = (1 - fy) * ((1 - fx) * in[y0 * W + x0] + fx * in[y0 * W + x1]) +
                           fy * ((1 - fx) * in[y1 * W + x0] + fx * in[y1 * W + x1]);
          y[((n * C + c) * 2 * H + oy) * 2 * W + ox] = static_cast<float>(v);
        }
      }
    }
  return y;
}

/// Per-pixel scan over all centers: nearest shifted-position center with
/// ties broken by (higher score, row, col); 0 if beyond the distance bound.
inline LabelMap group_pixels(const std::vector<emsa::CenterPoint>& centers, const Tensor& offsets,
                             const emsa::Mask& fg, double offset_distance) {
  const std::size_t H = offsets.dim(1), W = offsets.dim(2);
  const double bound = offset_distance * std::sqrt(double(H) * H + double(W) * W);
  LabelMap out(H, W);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t i = r * W + c;
      if (!fg[i] || centers.empty()) continue;
      const double sr = double(r) + double(offsets[i]) * double(H);
      const double sc = double(c) + double(offsets[H * W + i]) * double(W);
      using Key = std::tuple<double, float, std::size_t, std::size_t, std::size_t>;
      std::vector<Key> keys;
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const double dr = sr - double(centers[k].row), dc = sc - double(centers[k].col);
        keys.emplace_back(dr * dr + dc * dc, -centers[k].score, centers[k].row, centers[k].col, k);
      }
      const Key best = *std::min_element(keys.begin(), keys.end());
      if (std::sqrt(std::get<0>(best)) > bound) continue;
      out.data[i] = static_cast<std::int32_t>(std::get<4>(best) + 1);
    }
  return out;
}

struct PqClass {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;
};

/// Enumerates every (GT, predicted) segment pair of a class, computes IoU by
/// a full pixel scan and verifies that >0.5 matches are unique.
inline std::map<std::int32_t, PqClass> panoptic_quality(const emsa::PanopticMap& pred,
                                                        const emsa::PanopticMap& gt,
                                                        const emsa::ClassSpectrum& spectrum) {
  const std::size_t n = gt.semantic.size();
  auto ignored = [&](std::size_t i) {
    const auto g = gt.semantic.data[i];
    return g == 0 || (spectrum.is_thing(g) && gt.instance.data[i] == 0);
  };
  auto gt_key = [&](std::size_t i) {
    const auto g = gt.semantic.data[i];
    return std::pair{g, spectrum.is_stuff(g) ? 0 : gt.instance.data[i]};
  };
  auto pred_key = [&](std::size_t i) {
    const auto p = pred.semantic.data[i];
    return std::pair{p, spectrum.is_stuff(p) ? 0 : pred.instance.data[i]};
  };
  std::set<std::pair<std::int32_t, std::int32_t>> gts, preds;
  for (std::size_t i = 0; i < n; ++i) {
    if (ignored(i)) continue;
    gts.insert(gt_key(i));
    if (pred.semantic.data[i] != 0) preds.insert(pred_key(i));
  }
  std::map<std::int32_t, PqClass> out;
  std::set<std::pair<std::int32_t, std::int32_t>> gt_hit, pred_hit;
  for (const auto& g : gts) {
    for (const auto& p : preds) {
      if (g.first != p.first) continue;
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (ignored(i)) continue;
        const bool in_g = gt_key(i) == g;
        const bool in_p = pred.semantic.data[i] != 0 && pred_key(i) == p;
        inter += in_g && in_p;
        uni += in_g || in_p;
      }
      const double iou = double(inter) / double(uni);
      if (iou > 0.5) {
        if (gt_hit.contains(g) || pred_hit.contains(p)) {
          throw std::logic_error("non-unique >0.5 match");
        }
        gt_hit.insert(g);
        pred_hit.insert(p);
        ++out[g.first].tp;
        out[g.first].iou_sum += iou;
      }
    }
  }
  for (const auto& g : gts)
    if (!gt_hit.contains(g)) ++out[g.first].fn;
  for (const auto& p : preds)
    if (!pred_hit.contains(p)) ++out[p.first].fp;
  return out;
}

/// Per-class IoU counted directly from pixel predicates.
inline std::map<std::int32_t, double> class_iou(const LabelMap& pred, const LabelMap& gt,
                                                std::int32_t num_classes) {
  std::map<std::int32_t, double> out;
  for (std::int32_t c = 1; c <= num_classes; ++c) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt.data[i] == 0) continue;
      const bool g = gt.data[i] == c, p = pred.data[i] == c;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
    }
    if (tp + fp + fn) out[c] = double(tp) / double(tp + fp + fn);
  }
  return out;
}

inline Tensor random_tensor(std::mt19937_64& rng, emsa::Shape shape, float lo = -1.0f,
                            float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = u(rng);
  return t;
}

}  // namespace oracle
