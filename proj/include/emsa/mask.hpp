#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "emsa/label_map.hpp"

namespace emsa {

/// Binary per-pixel mask.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, bool fill = false)
      : height(h), width(w), data(h * w, fill ? 1 : 0) {}

  bool operator()(std::size_t r, std::size_t c) const { return data[r * width + c] != 0; }
  bool operator[](std::size_t i) const { return data[i] != 0; }
  void set(std::size_t i, bool v = true) { data[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
  }

  friend bool operator==(const Mask&, const Mask&) = default;
};

inline Mask nonzero_mask(const LabelMap& m) {
  Mask out(m.height, m.width);
  for (std::size_t i = 0; i < m.size(); ++i) out.set(i, m.data[i] != 0);
  return out;
}

}  // namespace emsa
