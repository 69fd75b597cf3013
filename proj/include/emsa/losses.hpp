#pragma once

// Forward evaluation of the training losses (no gradients).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "emsa/label_map.hpp"
#include "emsa/mask.hpp"
#include "emsa/orientation.hpp"
#include "emsa/tensor.hpp"

namespace emsa {

class LossError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Weighted cross-entropy over the full-resolution logits and every side
/// output. Logit channel k scores semantic id k + 1; GT id 0 is void.
/// The sum runs over non-void pixels of all outputs and is divided by the
/// total pixel count of all outputs (void pixels included).
/// Side-output GT is the nearest-neighbour downsampled `gt`.
inline double semantic_loss(const std::vector<Tensor>& logits, const LabelMap& gt,
                            const std::vector<float>& class_weights) {
  if (logits.empty()) throw LossError("semantic loss needs at least one output");
  double numerator = 0.0;
  std::size_t pixels = 0;
  for (const Tensor& out : logits) {
    require_image(out, "semantic logits");
    if (out.batch() != 1) throw ShapeError("batch", "semantic loss expects a single image");
    const std::size_t C = out.channels(), h = out.height(), w = out.width();
    if (class_weights.size() != C) {
      throw ShapeError("channels", "class weights have " + std::to_string(class_weights.size()) +
                                       " entries for " + std::to_string(C) + " logit channels");
    }
    if (out.height() > gt.height || out.width() > gt.width) {
      throw ShapeError("extent", "logits " + to_string(out.shape()) + " larger than GT " +
                                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
    }
    const LabelMap target = resize_nearest(gt, h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
      const auto id = target.data[i];
      if (id == 0) continue;
      if (id < 0 || std::size_t(id) > C) {
        throw LossError("GT id " + std::to_string(id) + " has no logit channel");
      }
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, double(out.plane(0, c)[i]));
      double se = 0.0;
      for (std::size_t c = 0; c < C; ++c) se += std::exp(double(out.plane(0, c)[i]) - mx);
      const double nll = mx + std::log(se) - double(out.plane(0, std::size_t(id) - 1)[i]);
      numerator += double(class_weights[std::size_t(id) - 1]) * nll;
    }
    pixels += h * w;
  }
  return numerator / double(pixels);
}

/// Median-frequency class weights: freq_c = pixels of c / pixels of images
/// containing c; w_c = median(freq) / freq_c. Absent classes get 0. Index k
/// is semantic id k + 1.
inline std::vector<float> median_frequency_weights(const std::vector<LabelMap>& maps,
                                                   std::int32_t num_classes) {
  std::vector<double> count(num_classes, 0.0), image_pixels(num_classes, 0.0);
  for (const auto& m : maps) {
    std::vector<std::size_t> local(num_classes, 0);
    for (auto id : m.data) {
      if (id > 0 && id <= num_classes) ++local[id - 1];
    }
    for (std::int32_t c = 0; c < num_classes; ++c) {
      if (local[c] == 0) continue;
      count[c] += double(local[c]);
      image_pixels[c] += double(m.size());
    }
  }
  std::vector<double> freq;
  for (std::int32_t c = 0; c < num_classes; ++c)
    if (count[c] > 0) freq.push_back(count[c] / image_pixels[c]);
  std::vector<float> w(num_classes, 0.0f);
  if (freq.empty()) return w;
  std::vector<double> sorted = freq;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (std::int32_t c = 0; c < num_classes; ++c) {
    if (count[c] > 0) w[c] = static_cast<float>(median / (count[c] / image_pixels[c]));
  }
  return w;
}

/// A masked loss value; `empty_mask` flags a mask without pixels (value 0).
struct MaskedLoss {
  double value = 0.0;
  bool empty_mask = false;
};

namespace detail {

inline void require_masked_pair(const Tensor& pred, const Tensor& target, const Mask& mask,
                                std::size_t channels, const char* what) {
  require_image(pred, what);
  if (pred.shape() != target.shape()) {
    throw ShapeError("shape", std::string(what) + ": prediction " + to_string(pred.shape()) +
                                  " vs target " + to_string(target.shape()));
  }
  if (pred.channels() != channels) {
    throw ShapeError("channels", std::string(what) + " expects " + std::to_string(channels) +
                                     " channels");
  }
  if (mask.height != pred.height() || mask.width != pred.width()) {
    throw ShapeError("extent", std::string(what) + ": mask extents differ from prediction");
  }
}

}  // namespace detail

/// Mean squared error over GT instance pixels.
inline MaskedLoss center_loss(const Tensor& pred, const Tensor& target, const Mask& mask) {
  detail::require_masked_pair(pred, target, mask, 1, "center loss");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask[i]) continue;
    const double d = double(pred[i]) - double(target[i]);
    sum += d * d;
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {sum / double(n), false};
}

/// Mean absolute error over GT instance pixels and both offset channels.
inline MaskedLoss offset_loss(const Tensor& pred, const Tensor& target, const Mask& mask) {
  detail::require_masked_pair(pred, target, mask, 2, "offset loss");
  const std::size_t hw = mask.data.size();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hw; ++i) {
    if (!mask[i]) continue;
    sum += std::abs(double(pred[i]) - double(target[i]));
    sum += std::abs(double(pred[hw + i]) - double(target[hw + i]));
    n += 2;
  }
  if (n == 0) return {0.0, true};
  return {sum / double(n), false};
}

/// Mean von Mises loss over supervised pixels. `target` holds GT biternions.
inline MaskedLoss orientation_loss(const Tensor& pred, const Tensor& target, const Mask& mask,
                                   double kappa = kDefaultKappa) {
  detail::require_masked_pair(pred, target, mask, 2, "orientation loss");
  const std::size_t hw = mask.data.size();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hw; ++i) {
    if (!mask[i]) continue;
    const Angle gt = decode_biternion({target[i], target[hw + i]});
    Biternion p{pred[i], pred[hw + i]};
    if (p.norm() == 0.0) p = {1.0, 0.0};
    sum += von_mises_loss(p, gt, kappa);
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {sum / double(n), false};
}

inline constexpr double kDefaultLabelSmoothing = 0.1;

/// Cross-entropy against the smoothed target: 1 - eps on `gt_index`,
/// eps / (K - 1) elsewhere.
inline double scene_loss(const Tensor& logits, std::size_t gt_index,
                         double epsilon = kDefaultLabelSmoothing) {
  const std::size_t K = logits.size();
  if (K < 2) throw ShapeError("classes", "scene loss needs >= 2 classes");
  if (gt_index >= K) throw LossError("scene GT index out of range");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw LossError("label smoothing must lie in [0, 1)");
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits.data()) mx = std::max(mx, double(v));
  double se = 0.0;
  for (float v : logits.data()) se += std::exp(double(v) - mx);
  const double lse = mx + std::log(se);
  double loss = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double q = k == gt_index ? 1.0 - epsilon : epsilon / double(K - 1);
    if (q > 0.0) loss += q * (lse - double(logits[k]));
  }
  return loss;
}

struct TaskWeights {
  double semantic = 1.0;
  double scene = 0.25;
  double instance = 3.0;  // center + offset
  double orientation = 1.0;

  void validate() const {
    for (double w : {semantic, scene, instance, orientation}) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw LossError("task weights must be finite and >= 0");
    }
    if (semantic + scene + instance + orientation == 0.0) {
      throw LossError("at least one task weight must be > 0");
    }
  }
};

struct LossParts {
  double semantic = 0.0;
  double scene = 0.0;
  double center = 0.0;
  double offset = 0.0;
  double orientation = 0.0;
};

inline double total_loss(const LossParts& parts, const TaskWeights& tw) {
  tw.validate();
  // A zero weight drops its task entirely, even a diverging one.
  const std::tuple<const char*, double, double> named[] = {
      {"semantic", tw.semantic, parts.semantic},    {"scene", tw.scene, parts.scene},
      {"center", tw.instance, parts.center},        {"offset", tw.instance, parts.offset},
      {"orientation", tw.orientation, parts.orientation}};
  for (const auto& [name, w, v] : named) {
    if (w != 0.0 && !std::isfinite(v)) throw LossError(std::string("non-finite ") + name + " loss");
  }
  auto term = [](double w, double v) { return w == 0.0 ? 0.0 : w * v; };
  return term(tw.semantic, parts.semantic) + term(tw.scene, parts.scene) +
         term(tw.instance, parts.center + parts.offset) +
         term(tw.orientation, parts.orientation);
}

}  // namespace emsa
