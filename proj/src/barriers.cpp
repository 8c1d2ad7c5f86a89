#include "liplab/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace liplab {

namespace {

constexpr double kN = 2.0;  // ambient dimension of the planar experiments

Vec2 area_barycenter(const Mesh& mesh) {
  Vec2 acc = Vec2::Zero();
  for (int t = 0; t < mesh.n_triangles(); ++t)
    acc += mesh.tri_area(t) * mesh.tri_barycenter(t);
  return acc / mesh.area;
}

double edge_lipschitz(const Mesh& mesh, const VecX& field) {
  double worst = 0.0;
  for (const Tri& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      int v = t[e], w = t[(e + 1) % 3];
      double len = (mesh.vertices[v] - mesh.vertices[w]).norm();
      if (len > 0) worst = std::max(worst, std::abs(field[v] - field[w]) / len);
    }
  return worst;
}

}  // namespace

VecX build_omega(const ConjugateGrid& fstar, double alpha, const Vec2& x0, const Mesh& mesh) {
  if (alpha == 0) throw contract_error("build_omega: alpha must be nonzero");
  double need = 0.0;
  for (const Vec2& v : mesh.vertices)
    need = std::max(need, (std::abs(alpha) * (v - x0) / kN).cwiseAbs().maxCoeff());
  Vec2 lo = fstar.box.lo, hi = fstar.box.hi;
  if (need > std::min({-lo.x(), -lo.y(), hi.x(), hi.y()})) {
    std::ostringstream msg;
    msg << "conjugate grid box too small for the barrier: need [-" << need << ", " << need
        << "]^2 inside [" << lo.x() << ", " << hi.x() << "] x [" << lo.y() << ", " << hi.y()
        << "]";
    throw contract_error(msg.str());
  }
  VecX omega(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v)
    omega[v] = (kN / alpha) * fstar.eval(alpha * (mesh.vertices[v] - x0) / kN);
  return omega;
}

std::pair<double, double> fit_constants(const VecX& omega_plus, const VecX& omega_minus,
                                        const VecX& phi, const Mesh& mesh, double alpha) {
  if (int(mesh.boundary_loop.size()) != phi.size())
    throw contract_error("fit_constants: phi must follow boundary_loop");
  if (alpha <= 0) throw contract_error("fit_constants: alpha must be positive");
  double c1 = std::numeric_limits<double>::infinity();
  double c2 = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < mesh.boundary_loop.size(); ++i) {
    int v = mesh.boundary_loop[i];
    c1 = std::min(c1, phi[i] - omega_plus[v]);
    c2 = std::max(c2, phi[i] - omega_minus[v]);
  }
  // shifting the conjugate by one ((f-1)* = f* + 1) widens both constants
  return {c1 - kN / alpha, c2 + kN / alpha};
}

BarrierField build_barriers(const Lagrangian& f, double alpha, const Mesh& mesh,
                            const VecX& phi) {
  if (alpha <= 0) throw contract_error("build_barriers: alpha must be positive");
  BarrierField b;
  b.alpha = alpha;
  b.x0 = area_barycenter(mesh);

  double need = 0.0;
  for (const Vec2& v : mesh.vertices)
    need = std::max(need, (alpha * (v - b.x0) / kN).cwiseAbs().maxCoeff());
  Box2 dual = Box2::symmetric(need * 1.02 + 1e-9, 257);

  // grow the primal window until every queried dual cell is attained inside
  double reach = 2 * dual.hi.x() + 2;
  ConjugateGrid fstar;
  bool ok = false;
  for (int grow = 0; grow < 9 && !ok; ++grow, reach *= 2) {
    fstar = conjugate(f, Box2::symmetric(reach, 513), dual);
    ok = true;
    for (const Vec2& v : mesh.vertices) {
      Vec2 q = alpha * (v - b.x0) / kN;
      if (!fstar.covered(q) || !fstar.covered(-q)) {
        ok = false;
        break;
      }
    }
  }
  if (!ok)
    throw contract_error(
        "build_barriers: conjugate window kept clipping; integrand may not be superlinear");

  b.omega_plus = build_omega(fstar, alpha, b.x0, mesh);
  b.omega_minus = build_omega(fstar, -alpha, b.x0, mesh);
  std::tie(b.c1, b.c2) = fit_constants(b.omega_plus, b.omega_minus, phi, mesh, alpha);
  b.K = std::max(edge_lipschitz(mesh, b.omega_plus), edge_lipschitz(mesh, b.omega_minus));
  return b;
}

LowerBarrier build_lower_barrier(const LBSCReport& lbsc, const VecX& phi, const Mesh& mesh) {
  if (!lbsc.pass) throw contract_error("build_lower_barrier: slope condition did not pass");
  if (lbsc.slopes.size() != mesh.boundary_loop.size() ||
      int(mesh.boundary_loop.size()) != phi.size())
    throw contract_error("build_lower_barrier: sample count mismatch");

  LowerBarrier low;
  low.ell.resize(mesh.n_vertices());
  for (const Vec2& z : lbsc.slopes) low.L = std::max(low.L, z.norm());
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < mesh.boundary_loop.size(); ++i) {
      const Vec2& gamma = mesh.vertices[mesh.boundary_loop[i]];
      best = std::max(best, phi[i] + lbsc.slopes[i].dot(mesh.vertices[v] - gamma));
    }
    low.ell[v] = best;
  }
  return low;
}

ComparisonReport verify_comparison(const VecX& u, const BarrierField& barriers,
                                   const LowerBarrier& lower, const VecX& g, double tol) {
  if (u.size() != barriers.omega_plus.size() || u.size() != lower.ell.size() ||
      u.size() != g.size())
    throw contract_error("verify_comparison: field sizes disagree");
  if (g.cwiseAbs().maxCoeff() > barriers.alpha)
    throw contract_error("verify_comparison: forcing exceeds the barrier bound alpha");

  ComparisonReport rep;
  rep.tol = tol;
  rep.lower_margin = u - barriers.omega_plus.array().matrix() - VecX::Constant(u.size(), barriers.c1);
  rep.upper_margin = barriers.omega_minus + VecX::Constant(u.size(), barriers.c2) - u;
  rep.ell_margin = u - lower.ell;
  rep.min_lower = rep.lower_margin.minCoeff();
  rep.min_upper = rep.upper_margin.minCoeff();
  rep.min_ell = rep.ell_margin.minCoeff();
  rep.sandwich_pass = rep.min_lower >= -tol && rep.min_upper >= -tol;
  rep.ell_checked = g.maxCoeff() <= 0.0;
  rep.ell_pass = rep.min_ell >= -tol;
  rep.pass = rep.sandwich_pass && (!rep.ell_checked || rep.ell_pass);
  return rep;
}

}  // namespace liplab
