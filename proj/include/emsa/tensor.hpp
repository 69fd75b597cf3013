#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace emsa {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

/// Raised when operands disagree on extents. `dimension()` names the
/// offending axis ("channels", "height", "kernel", ...).
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string dimension, const std::string& what)
      : std::invalid_argument(dimension + ": " + what),
        dimension_(std::move(dimension)) {}

  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

/// Dense float32 array, row-major, channels-first for images.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(std::move(shape)) {
    validate_extents();
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_extents();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("data", "payload length " + std::to_string(data_.size()) +
                                   " does not match shape " + to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float* raw() noexcept { return data_.data(); }
  const float* raw() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // Image accessors; valid for rank 3 (C,H,W) and rank 4 (N,C,H,W).
  std::size_t batch() const { return rank() == 4 ? shape_[0] : 1; }
  std::size_t channels() const { return shape_.at(rank() - 3); }
  std::size_t height() const { return shape_.at(rank() - 2); }
  std::size_t width() const { return shape_.at(rank() - 1); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height() + y) * width() + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height() + y) * width() + x];
  }

  std::span<float> plane(std::size_t n, std::size_t c) {
    const std::size_t hw = height() * width();
    return {data_.data() + (n * channels() + c) * hw, hw};
  }
  std::span<const float> plane(std::size_t n, std::size_t c) const {
    const std::size_t hw = height() * width();
    return {data_.data() + (n * channels() + c) * hw, hw};
  }

  Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
  Tensor reshaped(Shape shape) && {
    return Tensor(std::move(shape), std::move(data_));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void validate_extents() const {
    if (shape_.empty()) throw ShapeError("rank", "tensor rank must be >= 1");
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] == 0) {
        throw ShapeError("axis " + std::to_string(i),
                         "zero extent in shape " + to_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<float> data_;
};

inline void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 3 && t.rank() != 4) {
    throw ShapeError("rank", std::string(what) + " must be CxHxW or NxCxHxW, got " +
                                 to_string(t.shape()));
  }
}

/// Same shape as `like` with a different channel count and spatial size.
inline Shape image_shape(const Tensor& like, std::size_t c, std::size_t h,
                         std::size_t w) {
  if (like.rank() == 4) return {like.batch(), c, h, w};
  return {c, h, w};
}

// Threading. Work is split over independent output slices, so the thread
// count never changes results.

inline std::atomic<unsigned>& thread_count_setting() {
  static std::atomic<unsigned> count{1};
  return count;
}

inline void set_num_threads(unsigned n) { thread_count_setting() = std::max(1u, n); }
inline unsigned num_threads() { return thread_count_setting(); }

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(num_threads(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
}

}  // namespace emsa
