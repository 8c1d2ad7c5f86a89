#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace liplab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Tri = Eigen::Vector3i;

// Thrown when an operation's preconditions are violated (bad boxes, missing
// samples, infeasible configuration).  Callers that want a verdict instead of
// an abort catch this and map it to the "hypothesis failure" exit path.
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

inline double sqr(double x) { return x * x; }

/** Axis-aligned sampling box with a uniform node grid (nx x ny, nodes inclusive). */
struct Box2 {
  Vec2 lo = Vec2(-1, -1);
  Vec2 hi = Vec2(1, 1);
  int nx = 65;
  int ny = 65;

  double dx() const { return (hi.x() - lo.x()) / (nx - 1); }
  double dy() const { return (hi.y() - lo.y()) / (ny - 1); }
  double x(int i) const { return lo.x() + i * dx(); }
  double y(int j) const { return lo.y() + j * dy(); }
  Vec2 node(int i, int j) const { return Vec2(x(i), y(j)); }
  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
  /** Symmetric box [-b,b]^2 with an odd node count so 0 is a node. */
  static Box2 symmetric(double b, int n) {
    if (n % 2 == 0) ++n;
    return Box2{Vec2(-b, -b), Vec2(b, b), n, n};
  }
};

/** Low-discrepancy radical-inverse sequence (deterministic sampling). */
inline double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index + 1; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

}  // namespace liplab
