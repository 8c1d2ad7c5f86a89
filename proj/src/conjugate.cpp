#include "liplab/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace liplab {

namespace {

using ByteMat = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

VecX grid_nodes(double lo, double hi, int n) {
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

MatX sample_grid(const Lagrangian& f, const Box2& box) {
  MatX out(box.nx, box.ny);
  for (int i = 0; i < box.nx; ++i)
    for (int j = 0; j < box.ny; ++j) out(i, j) = f(box.node(i, j));
  return out;
}

ConjugateGrid transform(const MatX& data, const Box2& primal, const Box2& dual,
                        const ByteMat* in_mask) {
  if (data.rows() != primal.nx || data.cols() != primal.ny)
    throw contract_error("conjugate input does not match the primal grid");
  if (primal.nx < 2 || primal.ny < 2 || dual.nx < 2 || dual.ny < 2)
    throw contract_error("conjugate grids need at least two nodes per axis");

  VecX xs = grid_nodes(primal.lo.x(), primal.hi.x(), primal.nx);
  VecX ys = grid_nodes(primal.lo.y(), primal.hi.y(), primal.ny);
  VecX zxs = grid_nodes(dual.lo.x(), dual.hi.x(), dual.nx);
  VecX zys = grid_nodes(dual.lo.y(), dual.hi.y(), dual.ny);

  // pass 1: per primal row i, conjugate the second axis onto the dual nodes
  MatX partial(primal.nx, dual.ny);
  Eigen::MatrixXi argj(primal.nx, dual.ny);
  VecX out;
  std::vector<int> arg;
  for (int i = 0; i < primal.nx; ++i) {
    legendre_1d(ys, data.row(i).transpose(), zys, out, arg);
    for (int l = 0; l < dual.ny; ++l) {
      partial(i, l) = out[l];
      argj(i, l) = arg[l];
    }
  }

  // pass 2: per dual column, conjugate the first axis of -partial
  ConjugateGrid g;
  g.box = dual;
  g.values.resize(dual.nx, dual.ny);
  g.finite_mask.resize(dual.nx, dual.ny);
  for (int l2 = 0; l2 < dual.ny; ++l2) {
    VecX col = -partial.col(l2);
    legendre_1d(xs, col, zxs, out, arg);
    for (int l1 = 0; l1 < dual.nx; ++l1) {
      g.values(l1, l2) = out[l1];
      int i = arg[l1];
      int j = argj(i, l2);
      bool ok = i > 0 && i < primal.nx - 1 && j > 0 && j < primal.ny - 1;
      if (ok && in_mask) ok = (*in_mask)(i, j) != 0;
      g.finite_mask(l1, l2) = ok ? 1 : 0;
    }
  }
  return g;
}

}  // namespace

void legendre_1d(const VecX& nodes, const VecX& data, const VecX& slopes, VecX& out,
                 std::vector<int>& argmax) {
  const int n = static_cast<int>(nodes.size());
  if (data.size() != n || n < 2) throw contract_error("legendre_1d: bad input sizes");

  // lower convex hull of (nodes[j], data[j]); only hull points can attain the max
  std::vector<int> hull;
  hull.reserve(n);
  for (int j = 0; j < n; ++j) {
    while (hull.size() >= 2) {
      int a = hull[hull.size() - 2], b = hull.back();
      double cross = (nodes[b] - nodes[a]) * (data[j] - data[a]) -
                     (data[b] - data[a]) * (nodes[j] - nodes[a]);
      if (cross <= 0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(j);
  }

  const int m = static_cast<int>(slopes.size());
  out.resize(m);
  argmax.assign(m, 0);
  size_t v = 0;
  for (int l = 0; l < m; ++l) {
    // ascending slopes sweep the hull left to right exactly once
    while (v + 1 < hull.size() &&
           data[hull[v + 1]] - data[hull[v]] <= slopes[l] * (nodes[hull[v + 1]] - nodes[hull[v]]))
      ++v;
    int j = hull[v];
    out[l] = slopes[l] * nodes[j] - data[j];
    argmax[l] = j;
  }
}

ConjugateGrid conjugate_of_grid(const MatX& data, const Box2& primal, const Box2& dual) {
  return transform(data, primal, dual, nullptr);
}

ConjugateGrid conjugate(const Lagrangian& f, const Box2& primal, const Box2& dual) {
  return transform(sample_grid(f, primal), primal, dual, nullptr);
}

ConjugateGrid biconjugate(const Lagrangian& f, const Box2& primal, const Box2& dual) {
  ConjugateGrid star = conjugate(f, primal, dual);
  // a clipped first-stage node cannot vouch for the second-stage max through it
  return transform(star.values, dual, primal, &star.finite_mask);
}

ConjugateGrid sampled_grid(const Lagrangian& f, const Box2& box) {
  if (box.nx < 2 || box.ny < 2)
    throw contract_error("sampled_grid needs at least two nodes per axis");
  ConjugateGrid g;
  g.box = box;
  g.values = sample_grid(f, box);
  g.finite_mask.setOnes(box.nx, box.ny);
  return g;
}

double ConjugateGrid::eval(const Vec2& zeta) const {
  if (!box.contains(zeta)) {
    std::ostringstream msg;
    msg << "evaluation point (" << zeta.x() << ", " << zeta.y() << ") outside the grid box ["
        << box.lo.x() << ", " << box.hi.x() << "] x [" << box.lo.y() << ", " << box.hi.y() << "]";
    throw contract_error(msg.str());
  }
  int i = std::min(int((zeta.x() - box.lo.x()) / box.dx()), box.nx - 2);
  int j = std::min(int((zeta.y() - box.lo.y()) / box.dy()), box.ny - 2);
  double sx = (zeta.x() - box.x(i)) / box.dx(), sy = (zeta.y() - box.y(j)) / box.dy();
  return (1 - sx) * (1 - sy) * values(i, j) + sx * (1 - sy) * values(i + 1, j) +
         (1 - sx) * sy * values(i, j + 1) + sx * sy * values(i + 1, j + 1);
}

bool ConjugateGrid::covered(const Vec2& zeta) const {
  if (!box.contains(zeta)) return false;
  int i = std::min(int((zeta.x() - box.lo.x()) / box.dx()), box.nx - 2);
  int j = std::min(int((zeta.y() - box.lo.y()) / box.dy()), box.ny - 2);
  return finite_mask(i, j) && finite_mask(i + 1, j) && finite_mask(i, j + 1) &&
         finite_mask(i + 1, j + 1);
}

double ConjugateGrid::coverage_fraction() const {
  return finite_mask.cast<double>().mean();
}

bool superlinear_probe(const Lagrangian& f, double dual_radius, int n) {
  for (double z : {dual_radius, 2 * dual_radius}) {
    Box2 dual = Box2::symmetric(z, n);
    double reach = 2 * z + 2;
    bool attained = false;
    for (int grow = 0; grow < 6 && !attained; ++grow, reach *= 2) {
      ConjugateGrid g = conjugate(f, Box2::symmetric(reach, 257), dual);
      attained = g.finite_mask.minCoeff() != 0;
    }
    if (!attained) return false;
  }
  return true;
}

}  // namespace liplab
