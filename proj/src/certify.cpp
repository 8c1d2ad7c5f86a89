#include "liplab/certify.hpp"

#include <algorithm>
#include <cmath>

namespace liplab {

namespace {

// v at barycenters: <grad u, x - z> - u, one value per triangle
VecX tilted_field(const SolveResult& result, const Mesh& mesh, const Vec2& z) {
  VecX v(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Tri& T = mesh.triangles[t];
    double u_bary = (result.u[T[0]] + result.u[T[1]] + result.u[T[2]]) / 3.0;
    v[t] = result.grad[t].dot(mesh.tri_barycenter(t) - z) - u_bary;
  }
  return v;
}

}  // namespace

LipschitzCertificate lipschitz_certificate(const SolveResult& result, const Mesh& mesh,
                                           const LipschitzParams& params) {
  if (params.g_norm > 0.0 && params.eps <= 0.0)
    throw contract_error("lipschitz_certificate: a forcing term needs a positive modulus");

  LipschitzCertificate cert;
  cert.c_sobolev = params.c_sobolev;
  cert.sup_u = result.sup_norm;
  cert.r0 = (params.r + 1.0) * mesh.diam + cert.sup_u + 1.0;

  auto forcing_term = [&](double eps) {
    if (params.g_norm <= 0.0) return 0.0;
    return 3.0 * std::pow(params.c_sobolev * params.g_norm / eps, 2.0 / 3.0) *
           std::sqrt(mesh.area);
  };
  cert.q0 = cert.r0 + forcing_term(params.eps);
  cert.Q = cert.sup_u + cert.q0;
  cert.q0_quarter = cert.r0 + forcing_term(params.eps / 4.0);
  cert.Q_quarter = cert.sup_u + cert.q0_quarter;

  cert.ratio.resize(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    double d = boundary_distance(mesh, mesh.tri_barycenter(t));
    cert.ratio[t] = result.grad[t].norm() * d / cert.Q;
    if (cert.ratio[t] > cert.worst_ratio) {
      cert.worst_ratio = cert.ratio[t];
      cert.worst_triangle = t;
    }
  }
  cert.worst_ratio_quarter = cert.worst_ratio * cert.Q / cert.Q_quarter;
  cert.pass = cert.worst_ratio <= 1.0 + params.tol_lip;
  cert.pass_quarter = cert.worst_ratio_quarter <= 1.0 + params.tol_lip;
  return cert;
}

std::vector<Vec2> boundary_anchors(const Mesh& mesh, int n) {
  if (n < 1) throw contract_error("boundary_anchors: need at least one anchor");
  const std::vector<int>& loop = mesh.boundary_loop;
  const int m = int(loop.size());
  VecX cum(m + 1);
  cum[0] = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vec2& a = mesh.vertices[loop[i]];
    const Vec2& b = mesh.vertices[loop[(i + 1) % m]];
    cum[i + 1] = cum[i] + (b - a).norm();
  }
  std::vector<Vec2> anchors(n);
  int seg = 0;
  for (int j = 0; j < n; ++j) {
    double s = cum[m] * double(j) / n;
    while (seg + 1 < m && cum[seg + 1] < s) ++seg;
    double t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
    const Vec2& a = mesh.vertices[loop[seg]];
    const Vec2& b = mesh.vertices[loop[(seg + 1) % m]];
    anchors[j] = a + t * (b - a);
  }
  return anchors;
}

ThetaProfile theta_profile(const SolveResult& result, const Mesh& mesh, const Vec2& z,
                           const VecX& q_grid, double q0, double tol_theta) {
  if (boundary_distance(mesh, z) > 1e-6 * mesh.diam)
    throw contract_error("theta_profile: anchor must lie on the boundary");
  if (q_grid.size() < 2 || q_grid.minCoeff() > 1e-12 ||
      q_grid.maxCoeff() < 1.5 * q0 - 1e-9)
    throw contract_error("theta_profile: grid must cover [0, 1.5 q0]");

  VecX v = tilted_field(result, mesh, z);
  ThetaProfile prof;
  prof.anchor = z;
  prof.tol = tol_theta;
  prof.q = q_grid;
  prof.theta.resize(q_grid.size());
  for (int i = 0; i < q_grid.size(); ++i) {
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t)
      acc += mesh.tri_area(t) * std::max(v[t] - q_grid[i], 0.0);
    prof.theta[i] = acc;
  }
  prof.q_star = 0.0;
  for (int i = 0; i < q_grid.size(); ++i)
    if (prof.theta[i] > tol_theta) prof.q_star = std::max(prof.q_star, prof.q[i]);
  return prof;
}

void attach_theta(LipschitzCertificate& cert, const SolveResult& result, const Mesh& mesh,
                  int n_anchors, int n_q) {
  VecX grid = VecX::LinSpaced(n_q, 0.0, 1.5 * cert.q0);
  cert.theta.clear();
  for (const Vec2& z : boundary_anchors(mesh, n_anchors))
    cert.theta.push_back(theta_profile(result, mesh, z, grid, cert.q0));
}

HolderCertificate holder_certificate(const SolveResult& result, const Mesh& mesh,
                                     const LagrangianPtr& f, double p, double c,
                                     int n_anchors, int n_depths) {
  if (p <= 1.5)
    throw contract_error("holder_certificate: exponent needs p > (n+1)/2 = 3/2");

  HolderCertificate cert;
  cert.p = p;
  cert.c_growth = c;
  cert.alpha = (2.0 * p - 3.0) / (4.0 * p - 1.0);

  cert.growth_ok = true;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Vec2& gr = result.grad[t];
    if ((*f)(gr) + 1e-12 < c * std::pow(gr.norm(), p)) {
      cert.growth_ok = false;
      break;
    }
  }

  PointLocator locator(mesh);
  const std::vector<int>& loop = mesh.boundary_loop;
  const int m = int(loop.size());
  std::vector<Vec2> anchors = boundary_anchors(mesh, n_anchors);

  // inward normal per anchor, from the boundary edge the anchor sits on
  double best = 0.0;
  int pairs = 0;
  for (const Vec2& z : anchors) {
    int seg = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const Vec2& a = mesh.vertices[loop[i]];
      const Vec2& b = mesh.vertices[loop[(i + 1) % m]];
      Vec2 ab = b - a;
      double t = std::clamp((z - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      double d = (z - (a + t * ab)).norm();
      if (d < dist) {
        dist = d;
        seg = i;
      }
    }
    Vec2 tangent =
        (mesh.vertices[loop[(seg + 1) % m]] - mesh.vertices[loop[seg]]).normalized();
    Vec2 inward(-tangent.y(), tangent.x());

    double uz = locator.eval(result.u, z);
    for (int j = 1; j <= n_depths; ++j) {
      Vec2 x = z + (0.45 * mesh.diam * j / n_depths) * inward;
      int t = locator.find(x);
      if (t < 0) continue;
      double ux = locator.eval(result.u, x);
      double s = (x - z).norm();
      if (s < 1e-14) continue;
      best = std::max(best, std::abs(ux - uz) / std::pow(s, cert.alpha));
      ++pairs;
    }
  }
  cert.constant = best;
  cert.pairs = pairs;
  cert.pass = cert.growth_ok && pairs > 0 && std::isfinite(best);
  return cert;
}

}  // namespace liplab
