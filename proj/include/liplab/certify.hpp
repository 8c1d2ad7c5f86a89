#pragma once

#include <vector>

#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/solver.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Excess profile of the tilted field v(x) = <grad u(x), x - z> - u(x) above a
 * boundary anchor z,
 *   Theta(q) = integral over Omega of (v - q)^+,
 * evaluated exactly for the piecewise-constant v of the discrete solution.
 * q_star is the largest grid value where Theta still exceeds tol.
 */
struct ThetaProfile {
  Vec2 anchor = Vec2::Zero();
  VecX q;
  VecX theta;
  double q_star = 0.0;
  double tol = 1e-9;
};

/**
 * Data entering the gradient bound |grad u| <= Q / dist(., boundary):
 *   r0 = (r+1) diam + sup|u| + 1,
 *   q0 = r0 + 3 (c |g|_inf / eps)^(2/3) sqrt(area),
 *   Q  = sup|u| + q0.
 * eps may be zero only when g vanishes (the forcing term drops out).
 */
struct LipschitzParams {
  double r = 0.0;
  double eps = 0.0;
  double g_norm = 0.0;
  double c_sobolev = 1.0;
  double tol_lip = 0.0;
};

/**
 * Per-triangle verdict of |grad u| dist(barycenter) <= Q.  The quarter fields
 * repeat the computation with eps/4, the modulus the smoothed integrands
 * retain; both are reported, neither is preferred.
 */
struct LipschitzCertificate {
  double r0 = 0.0;
  double q0 = 0.0;
  double Q = 0.0;
  double q0_quarter = 0.0;
  double Q_quarter = 0.0;
  double c_sobolev = 1.0;
  double sup_u = 0.0;

  VecX ratio;  // |grad u| dist / Q per triangle, eps variant
  double worst_ratio = 0.0;
  double worst_ratio_quarter = 0.0;
  int worst_triangle = -1;
  bool pass = false;
  bool pass_quarter = false;

  std::vector<ThetaProfile> theta;
};

LipschitzCertificate lipschitz_certificate(const SolveResult& result, const Mesh& mesh,
                                           const LipschitzParams& params);

/** n points equally spaced in arc length along the boundary polyline. */
std::vector<Vec2> boundary_anchors(const Mesh& mesh, int n);

/**
 * Theta sampled on q_grid, which must cover [0, 1.5 q0]; z must lie on the
 * boundary polyline.
 */
ThetaProfile theta_profile(const SolveResult& result, const Mesh& mesh, const Vec2& z,
                           const VecX& q_grid, double q0, double tol_theta = 1e-9);

/** Fills cert.theta with profiles at n_anchors anchors on a fresh 0..1.5 q0 grid. */
void attach_theta(LipschitzCertificate& cert, const SolveResult& result, const Mesh& mesh,
                  int n_anchors, int n_q = 181);

/**
 * Empirical boundary Hoelder quotient at exponent
 *   alpha = (2p - n - 1)/(4p + n - 3), n = 2,
 * over anchors paired with points marched inward along the boundary normal.
 * growth_ok records whether f >= c |xi|^p held at every observed gradient.
 */
struct HolderCertificate {
  double p = 2.0;
  int n = 2;
  double alpha = 0.0;
  double c_growth = 0.0;
  double constant = 0.0;
  int pairs = 0;
  bool growth_ok = false;
  bool pass = false;
};

/** Throws when p <= (n+1)/2 = 1.5, where the exponent formula degenerates. */
HolderCertificate holder_certificate(const SolveResult& result, const Mesh& mesh,
                                     const LagrangianPtr& f, double p, double c,
                                     int n_anchors = 512, int n_depths = 64);

}  // namespace liplab
