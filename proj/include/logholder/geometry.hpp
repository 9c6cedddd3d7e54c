#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace logholder {

/// A point on the flat circle of circumference 1, stored as an arc-length
/// coordinate in [0, 1). All constructors reduce mod 1.
class CirclePoint {
 public:
  CirclePoint() = default;

  explicit CirclePoint(double position) : position_(reduce(position)) {}

  double position() const { return position_; }

  static double reduce(double x) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("CirclePoint: non-finite coordinate");
    }
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;  // guards against floor rounding at tiny negatives
    return r;
  }

  friend bool operator==(CirclePoint a, CirclePoint b) {
    return a.position_ == b.position_;
  }

 private:
  double position_ = 0.0;
};

/// Geodesic distance on the unit-circumference circle. Always in [0, 1/2].
inline double circle_distance(CirclePoint a, CirclePoint b) {
  double d = std::fabs(a.position() - b.position());
  return d <= 0.5 ? d : 1.0 - d;
}

/// Distance between raw arc-length coordinates (any reals; reduced mod 1).
inline double circle_distance(double a, double b) {
  double d = a - b;
  d -= std::floor(d);
  return d <= 0.5 ? d : 1.0 - d;
}

/// Volume of the k-dimensional unit ball, k in {1, 2, 3}.
inline double unit_ball_volume(int k) {
  switch (k) {
    case 1:
      return 2.0;
    case 2:
      return M_PI;
    case 3:
      return 4.0 * M_PI / 3.0;
    default:
      throw std::invalid_argument("unit_ball_volume: dimension must be 1, 2 or 3");
  }
}

/// Uniform grid of G nodes at positions j/G with Lebesgue weight 1/G each.
/// Total weight is exactly 1, matching the unit-mass normalization of the
/// circle. Grids double cleanly (node sets are nested under doubling).
class CircleGrid {
 public:
  explicit CircleGrid(std::size_t size) : size_(size) {
    if (size_ == 0) throw std::invalid_argument("CircleGrid: size must be positive");
  }

  std::size_t size() const { return size_; }
  double cell_weight() const { return 1.0 / static_cast<double>(size_); }
  double node(std::size_t j) const {
    return static_cast<double>(j) / static_cast<double>(size_);
  }
  CirclePoint point(std::size_t j) const { return CirclePoint(node(j)); }

  CircleGrid doubled() const { return CircleGrid(2 * size_); }

 private:
  std::size_t size_;
};

}  // namespace logholder
