#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "emsa/tensor.hpp"

namespace emsa {

/// Per-pixel integer map (semantic ids, instance ids, ...), row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0)
      : height(h), width(w), data(h * w, fill) {}
  LabelMap(std::size_t h, std::size_t w, std::vector<std::int32_t> values)
      : height(h), width(w), data(std::move(values)) {
    if (data.size() != h * w) throw ShapeError("data", "label map payload size mismatch");
  }

  std::size_t size() const noexcept { return data.size(); }
  std::int32_t& operator()(std::size_t r, std::size_t c) { return data[r * width + c]; }
  std::int32_t operator()(std::size_t r, std::size_t c) const { return data[r * width + c]; }

  bool same_extents(const LabelMap& o) const {
    return height == o.height && width == o.width;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline void require_same_extents(const LabelMap& a, const LabelMap& b, const char* what) {
  if (a.height != b.height) {
    throw ShapeError("height", std::string(what) + ": " + std::to_string(a.height) +
                                   " vs " + std::to_string(b.height));
  }
  if (a.width != b.width) {
    throw ShapeError("width", std::string(what) + ": " + std::to_string(a.width) +
                                  " vs " + std::to_string(b.width));
  }
}

/// Nearest-neighbour resize (labels are categorical).
inline LabelMap resize_nearest(const LabelMap& m, std::size_t h, std::size_t w) {
  if (m.height == h && m.width == w) return m;
  LabelMap out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t sr = std::min(m.height - 1, r * m.height / h);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t sc = std::min(m.width - 1, c * m.width / w);
      out(r, c) = m(sr, sc);
    }
  }
  return out;
}

/// Channel argmax of a CxHxW score tensor; channel k maps to label k + offset.
inline LabelMap argmax_labels(const Tensor& scores, std::int32_t offset = 0) {
  require_image(scores, "argmax input");
  const std::size_t H = scores.height(), W = scores.width();
  LabelMap out(H, W);
  for (std::size_t i = 0; i < H * W; ++i) {
    std::size_t best = 0;
    float best_v = scores.plane(0, 0)[i];
    for (std::size_t c = 1; c < scores.channels(); ++c) {
      const float v = scores.plane(0, c)[i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.data[i] = static_cast<std::int32_t>(best) + offset;
  }
  return out;
}

}  // namespace emsa
