#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace persistify {

using Vec2 = Eigen::Vector2d;

template <class S>
using Vec2T = Eigen::Matrix<S, 2, 1>;

/// Rectangular environment the robots operate in.
struct Workspace {
  Vec2 lower{-1.5, -1.0};
  Vec2 upper{1.5, 1.0};

  void validate() const {
    if (!(upper.x() > lower.x()) || !(upper.y() > lower.y())) {
      throw std::invalid_argument("workspace: upper must exceed lower componentwise");
    }
  }

  Vec2 extent() const { return upper - lower; }
  double area() const { return extent().x() * extent().y(); }

  bool contains(const Vec2& x, double margin = 0.0) const {
    return x.x() >= lower.x() - margin && x.x() <= upper.x() + margin &&
           x.y() >= lower.y() - margin && x.y() <= upper.y() + margin;
  }

  Vec2 clamp(const Vec2& x) const {
    return {std::min(std::max(x.x(), lower.x()), upper.x()),
            std::min(std::max(x.y(), lower.y()), upper.y())};
  }
};

/// Position plus battery level of one robot.
struct AugmentedState {
  Vec2 x{0.0, 0.0};
  double E = 0.5;
};

}  // namespace persistify
