#pragma once

// Orientation around the ground-plane normal, in the camera frame
// (egocentric). Angles are degrees in [0, 360).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>

#include "emsa/tensor.hpp"

namespace emsa {

class OrientationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline double canonical_degrees(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  if (d >= 360.0) d -= 360.0;  // fmod of tiny negatives rounds to 360
  return d;
}

inline constexpr double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

class Angle {
 public:
  constexpr Angle() = default;
  explicit Angle(double degrees) : deg_(canonical_degrees(degrees)) {}

  static Angle from_radians(double rad) { return Angle(rad_to_deg(rad)); }

  double degrees() const noexcept { return deg_; }
  double radians() const noexcept { return deg_to_rad(deg_); }

  friend bool operator==(Angle, Angle) = default;

 private:
  double deg_ = 0.0;
};

/// (cos, sin) encoding of an angle.
struct Biternion {
  double cos = 1.0;
  double sin = 0.0;

  double norm() const { return std::hypot(cos, sin); }
};

inline Biternion encode_biternion(Angle a) {
  const double r = a.radians();
  return {std::cos(r), std::sin(r)};
}

inline Angle decode_biternion(Biternion b) {
  if (b.norm() == 0.0 || !std::isfinite(b.norm())) {
    throw OrientationError("cannot decode a zero biternion: direction undefined");
  }
  return Angle::from_radians(std::atan2(b.sin, b.cos));
}

inline constexpr double kDefaultKappa = 1.0;

/// 1 - exp(kappa * (cos(dtheta) - 1)); 0 for a perfect match, at most
/// 1 - exp(-2 kappa).
inline double von_mises_loss(Biternion pred, Angle gt, double kappa = kDefaultKappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("von Mises kappa must be > 0");
  const double n = pred.norm();
  if (n == 0.0) throw OrientationError("zero biternion prediction");
  const Biternion g = encode_biternion(gt);
  // cos(pred - gt) via the dot product of unit vectors
  const double cos_delta = std::clamp((pred.cos * g.cos + pred.sin * g.sin) / n, -1.0, 1.0);
  return 1.0 - std::exp(kappa * (cos_delta - 1.0));
}

/// Shortest arc between two angles, in [0, 180].
inline double angular_error(Angle a, Angle b) {
  const double d = std::fmod(std::abs(a.degrees() - b.degrees()), 360.0);
  return std::min(d, 360.0 - d);
}

/// Circular mean of the per-pixel biternions of a 2xHxW field over the given
/// flat pixel indices. Each pixel vector is normalized before summation.
inline Angle instance_orientation(const Tensor& field, std::span<const std::size_t> pixels) {
  require_image(field, "orientation field");
  if (field.channels() != 2) throw ShapeError("channels", "orientation field needs 2 channels");
  if (pixels.empty()) throw OrientationError("instance has no pixels");
  const auto cos_plane = field.plane(0, 0);
  const auto sin_plane = field.plane(0, 1);
  double sum_cos = 0.0, sum_sin = 0.0;
  for (std::size_t p : pixels) {
    if (p >= cos_plane.size()) throw ShapeError("pixel", "pixel index outside field");
    const double c = cos_plane[p], s = sin_plane[p];
    const double n = std::hypot(c, s);
    if (n == 0.0) continue;
    sum_cos += c / n;
    sum_sin += s / n;
  }
  if (std::hypot(sum_cos, sum_sin) < 1e-9) {
    throw OrientationError("resultant vector vanishes: circular mean undefined");
  }
  return Angle::from_radians(std::atan2(sum_sin, sum_cos));
}

}  // namespace emsa
