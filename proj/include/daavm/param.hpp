#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace daavm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Axis-aligned box in parameter space.
struct Box {
  Vec lo, hi;

  Box() = default;
  Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Box: dimension mismatch");
    for (int i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("Box: lo must be < hi coordinatewise");
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& x) const {
    if (x.size() != lo.size()) return false;
    for (int i = 0; i < lo.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  Vec width() const { return hi - lo; }
  double width(int j) const { return hi[j] - lo[j]; }
  Vec center() const { return 0.5 * (lo + hi); }

  // Intersection, clamped so the result stays a valid box.
  Box intersect(const Box& other) const {
    Vec l = lo.cwiseMax(other.lo), h = hi.cwiseMin(other.hi);
    for (int i = 0; i < l.size(); ++i)
      if (!(l[i] < h[i])) throw std::invalid_argument("Box::intersect: empty intersection");
    return Box(l, h);
  }
};

inline void check_finite(const Vec& theta, const char* where) {
  for (int i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta[i])) throw std::invalid_argument(std::string(where) + ": non-finite parameter");
}

}  // namespace daavm
