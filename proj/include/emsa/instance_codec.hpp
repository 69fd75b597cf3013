#pragma once

// Bottom-up instance encoding: each instance is a Gaussian bump at its
// center of mass in a heatmap plus per-pixel offsets to that center,
// normalized by the map extents so they stay within [-1, 1]. Decoding
// thresholds and max-pool-suppresses the heatmap, keeps the top-k peaks and
// groups foreground pixels by their offset-shifted position.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emsa/label_map.hpp"
#include "emsa/mask.hpp"
#include "emsa/ops.hpp"
#include "emsa/orientation.hpp"
#include "emsa/spectrum.hpp"
#include "emsa/tensor.hpp"

namespace emsa {

struct CodecConfig {
  double sigma = 8.0;          // Gaussian std-dev in pixels at map resolution
  float threshold = 0.1f;      // minimum center score
  std::size_t pool_size = 17;  // keypoint NMS window, odd
  std::size_t top_k = 64;
  double offset_distance = 0.05;  // unknown if shifted pixel is farther than this * diagonal
  double min_area_fraction = 0.0025;

  void validate() const {
    if (!(threshold > 0.0f && threshold < 1.0f)) {
      throw std::invalid_argument("center threshold must lie in (0, 1)");
    }
    if (pool_size < 3 || pool_size % 2 == 0) {
      throw std::invalid_argument("pool size must be odd and >= 3");
    }
    if (top_k < 1) throw std::invalid_argument("top-k must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!(offset_distance > 0.0)) throw std::invalid_argument("offset distance must be > 0");
    if (!(min_area_fraction >= 0.0 && min_area_fraction < 1.0)) {
      throw std::invalid_argument("min area fraction must lie in [0, 1)");
    }
  }
};

using OrientationMap = std::map<std::int32_t, Angle>;

/// Relabels instances covering fewer than min_fraction * H * W pixels to 0.
inline LabelMap filter_small_instances(const LabelMap& inst, double min_fraction) {
  if (!(min_fraction >= 0.0 && min_fraction < 1.0)) {
    throw std::invalid_argument("min_fraction must lie in [0, 1)");
  }
  std::map<std::int32_t, std::size_t> area;
  for (auto id : inst.data)
    if (id != 0) ++area[id];
  const double min_area = min_fraction * double(inst.height) * double(inst.width);
  LabelMap out = inst;
  for (auto& id : out.data) {
    if (id != 0 && double(area[id]) < min_area) id = 0;
  }
  return out;
}

struct InstanceCenter {
  std::int32_t id = 0;
  double row = 0.0;  // center of mass
  double col = 0.0;
  std::size_t area = 0;
};

inline std::vector<InstanceCenter> centers_of_mass(const LabelMap& inst) {
  std::map<std::int32_t, InstanceCenter> acc;
  for (std::size_t r = 0; r < inst.height; ++r) {
    for (std::size_t c = 0; c < inst.width; ++c) {
      const auto id = inst(r, c);
      if (id == 0) continue;
      auto& e = acc[id];
      e.id = id;
      e.row += double(r);
      e.col += double(c);
      ++e.area;
    }
  }
  std::vector<InstanceCenter> out;
  out.reserve(acc.size());
  for (auto& [id, e] : acc) {
    e.row /= double(e.area);
    e.col /= double(e.area);
    out.push_back(e);
  }
  return out;
}

struct InstanceTargets {
  Tensor center;       // 1 x H x W, in [0, 1]
  Tensor offset;       // 2 x H x W, (drow / H, dcol / W)
  Tensor orientation;  // 2 x H x W biternion, zero where unsupervised
  Mask instance_mask;  // GT instance pixels; center/offset losses use it
  Mask thing_mask;
  Mask orientation_mask;
  LabelMap instances;  // after the min-area filter
  std::vector<InstanceCenter> centers;
};

struct EncodeInputs {
  const LabelMap* semantic = nullptr;  // with spectrum: thing mask and orientation classes
  const ClassSpectrum* spectrum = nullptr;
  const OrientationMap* orientations = nullptr;
};

inline InstanceTargets encode_targets(const LabelMap& instances, const CodecConfig& cfg,
                                      const EncodeInputs& extra = {}) {
  cfg.validate();
  if (instances.height == 0 || instances.width == 0) {
    throw ShapeError("extent", "instance map is empty");
  }
  for (auto id : instances.data) {
    if (id < 0) throw std::invalid_argument("negative instance id");
  }
  if (extra.semantic) require_same_extents(instances, *extra.semantic, "semantic vs instance");

  const std::size_t H = instances.height, W = instances.width;
  InstanceTargets t;
  t.instances = filter_small_instances(instances, cfg.min_area_fraction);
  t.centers = centers_of_mass(t.instances);
  t.center = Tensor({1, H, W});
  t.offset = Tensor({2, H, W});
  t.orientation = Tensor({2, H, W});
  t.instance_mask = nonzero_mask(t.instances);
  t.orientation_mask = Mask(H, W);

  if (extra.semantic && extra.spectrum) {
    t.thing_mask = Mask(H, W);
    for (std::size_t i = 0; i < H * W; ++i) {
      t.thing_mask.set(i, extra.spectrum->is_thing(extra.semantic->data[i]));
    }
  } else {
    t.thing_mask = t.instance_mask;
  }

  const double two_sigma_sq = 2.0 * cfg.sigma * cfg.sigma;
  auto heat = t.center.plane(0, 0);
  for (const auto& c : t.centers) {
    // Peak sits on the pixel nearest to the center of mass.
    const double pr = std::round(c.row), pc = std::round(c.col);
    for (std::size_t r = 0; r < H; ++r) {
      const double dr = double(r) - pr;
      for (std::size_t col = 0; col < W; ++col) {
        const double dc = double(col) - pc;
        const auto g = static_cast<float>(std::exp(-(dr * dr + dc * dc) / two_sigma_sq));
        float& h = heat[r * W + col];
        h = std::max(h, g);
      }
    }
  }

  std::map<std::int32_t, const InstanceCenter*> by_id;
  for (const auto& c : t.centers) by_id[c.id] = &c;
  auto off_r = t.offset.plane(0, 0), off_c = t.offset.plane(0, 1);
  auto ori_c = t.orientation.plane(0, 0), ori_s = t.orientation.plane(0, 1);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t col = 0; col < W; ++col) {
      const std::size_t i = r * W + col;
      const auto id = t.instances.data[i];
      if (id == 0) continue;
      const InstanceCenter& c = *by_id.at(id);
      off_r[i] = static_cast<float>((c.row - double(r)) / double(H));
      off_c[i] = static_cast<float>((c.col - double(col)) / double(W));

      if (!extra.orientations) continue;
      auto it = extra.orientations->find(id);
      if (it == extra.orientations->end()) continue;
      if (extra.semantic && extra.spectrum &&
          !extra.spectrum->is_orientation_relevant(extra.semantic->data[i])) {
        continue;
      }
      const Biternion b = encode_biternion(it->second);
      ori_c[i] = static_cast<float>(b.cos);
      ori_s[i] = static_cast<float>(b.sin);
      t.orientation_mask.set(i);
    }
  }
  return t;
}

struct CenterPoint {
  std::size_t row = 0;
  std::size_t col = 0;
  float score = 0.0f;

  friend bool operator==(const CenterPoint&, const CenterPoint&) = default;
};

/// Decode order: higher score first, then (row, col).
inline bool center_precedes(const CenterPoint& a, const CenterPoint& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.row != b.row) return a.row < b.row;
  return a.col < b.col;
}

inline std::vector<CenterPoint> decode_centers(const Tensor& heatmap, const CodecConfig& cfg) {
  cfg.validate();
  require_image(heatmap, "center heatmap");
  if (heatmap.channels() != 1 || heatmap.batch() != 1) {
    throw ShapeError("channels", "center heatmap must be 1 x H x W");
  }
  const std::size_t H = heatmap.height(), W = heatmap.width();
  const std::size_t radius = cfg.pool_size / 2;
  const Tensor pooled = pool2d(heatmap, PoolKind::max, cfg.pool_size, 1, radius);
  const auto v = heatmap.plane(0, 0);
  const auto m = pooled.plane(0, 0);

  std::vector<CenterPoint> candidates;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const float s = v[r * W + c];
      if (s >= cfg.threshold && s == m[r * W + c]) candidates.push_back({r, c, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(), center_precedes);

  // Plateau: equal maxima inside one window all pass the equality test;
  // keep only the first in decode order.
  std::vector<CenterPoint> kept;
  for (const auto& cand : candidates) {
    if (kept.size() >= cfg.top_k) break;
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const CenterPoint& k) {
      const auto dr = k.row > cand.row ? k.row - cand.row : cand.row - k.row;
      const auto dc = k.col > cand.col ? k.col - cand.col : cand.col - k.col;
      return k.score == cand.score && dr <= radius && dc <= radius;
    });
    if (!duplicate) kept.push_back(cand);
  }
  return kept;
}

struct DetectedInstance {
  std::int32_t id = 0;
  std::size_t center_row = 0;
  std::size_t center_col = 0;
  float score = 0.0f;
  std::vector<std::size_t> pixels;  // flat indices, ascending
  std::optional<std::int32_t> semantic_class;
  std::optional<Angle> orientation;
};

/// Assigns each foreground pixel to the nearest center after shifting it by
/// its denormalized offset. Instance ids are 1 + the center's index in
/// `centers`; instances that receive no pixels are omitted. Pixels farther
/// than offset_distance * diagonal from every center stay unknown.
inline std::vector<DetectedInstance> group_pixels(const std::vector<CenterPoint>& centers,
                                                  const Tensor& offsets, const Mask& fg,
                                                  const CodecConfig& cfg) {
  require_image(offsets, "offset field");
  if (offsets.channels() != 2 || offsets.batch() != 1) {
    throw ShapeError("channels", "offset field must be 2 x H x W");
  }
  const std::size_t H = offsets.height(), W = offsets.width();
  if (fg.height != H || fg.width != W) {
    throw ShapeError("extent", "foreground mask " + std::to_string(fg.height) + "x" +
                                   std::to_string(fg.width) + " vs offsets " +
                                   to_string(offsets.shape()));
  }

  std::vector<std::size_t> order(centers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return center_precedes(centers[a], centers[b]);
  });

  std::vector<DetectedInstance> by_center(centers.size());
  const double max_dist = cfg.offset_distance * std::sqrt(double(H) * H + double(W) * W);
  const auto off_r = offsets.plane(0, 0), off_c = offsets.plane(0, 1);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t i = r * W + c;
      if (!fg[i]) continue;
      const double sr = double(r) + double(off_r[i]) * double(H);
      const double sc = double(c) + double(off_c[i]) * double(W);
      double best_d2 = 0.0;
      std::size_t best = centers.size();
      for (std::size_t k : order) {
        const double dr = sr - double(centers[k].row);
        const double dc = sc - double(centers[k].col);
        const double d2 = dr * dr + dc * dc;
        if (best == centers.size() || d2 < best_d2) {
          best_d2 = d2;
          best = k;
        }
      }
      if (best == centers.size() || std::sqrt(best_d2) > max_dist) continue;
      by_center[best].pixels.push_back(i);
    }
  }

  std::vector<DetectedInstance> out;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    auto& inst = by_center[k];
    if (inst.pixels.empty()) continue;
    inst.id = static_cast<std::int32_t>(k + 1);
    inst.center_row = centers[k].row;
    inst.center_col = centers[k].col;
    inst.score = centers[k].score;
    out.push_back(std::move(inst));
  }
  return out;
}

inline LabelMap instances_to_label_map(const std::vector<DetectedInstance>& instances,
                                       std::size_t height, std::size_t width) {
  LabelMap out(height, width);
  for (const auto& inst : instances) {
    for (std::size_t p : inst.pixels) {
      if (p >= out.size()) throw ShapeError("pixel", "instance pixel outside map");
      if (out.data[p] != 0) {
        throw std::invalid_argument("instances " + std::to_string(out.data[p]) + " and " +
                                    std::to_string(inst.id) + " overlap");
      }
      out.data[p] = inst.id;
    }
  }
  return out;
}

/// Inverse of instances_to_label_map (semantic class and orientation unset).
inline std::vector<DetectedInstance> label_map_to_instances(const LabelMap& inst) {
  std::map<std::int32_t, DetectedInstance> acc;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto id = inst.data[i];
    if (id == 0) continue;
    auto& d = acc[id];
    d.id = id;
    d.pixels.push_back(i);
  }
  std::vector<DetectedInstance> out;
  for (auto& [id, d] : acc) {
    double r = 0, c = 0;
    for (auto p : d.pixels) {
      r += double(p / inst.width);
      c += double(p % inst.width);
    }
    d.center_row = static_cast<std::size_t>(std::lround(r / double(d.pixels.size())));
    d.center_col = static_cast<std::size_t>(std::lround(c / double(d.pixels.size())));
    d.score = 1.0f;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace emsa
