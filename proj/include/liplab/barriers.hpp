#pragma once

#include <utility>

#include "liplab/conjugate.hpp"
#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Conjugate-based comparison barriers on the mesh vertices:
 *   omega_alpha(x) = (N / alpha) fstar(alpha (x - x0) / N),  N = 2.
 *
 * c1 and c2 are fitted so that omega_plus + c1 minorizes and
 * omega_minus + c2 majorizes every minimizer of the smoothed energies whose
 * forcing stays below alpha in sup norm.  The fit works against the shifted
 * conjugate (f - 1)* = f* + 1, which costs a boundary slack of N/alpha on
 * each side and makes the sandwich robust to the smoothing band.
 */
struct BarrierField {
  VecX omega_plus;
  VecX omega_minus;
  double c1 = 0.0;
  double c2 = 0.0;
  double alpha = 0.0;
  double K = 0.0;  // measured Lipschitz constant of both barriers along edges
  Vec2 x0 = Vec2::Zero();
};

/** Pointwise omega_alpha via bilinear interpolation of fstar (alpha of either sign). */
VecX build_omega(const ConjugateGrid& fstar, double alpha, const Vec2& x0, const Mesh& mesh);

/**
 * c1 = min over boundary of (phi - omega_plus) - N/alpha,
 * c2 = max over boundary of (phi - omega_minus) + N/alpha.
 * phi is indexed by boundary_loop order.
 */
std::pair<double, double> fit_constants(const VecX& omega_plus, const VecX& omega_minus,
                                        const VecX& phi, const Mesh& mesh, double alpha);

/**
 * Full pipeline: sizes a conjugate grid so the dual box covers
 * alpha (x - x0) / N over the whole mesh (growing the primal window until
 * every queried node is attained inside), then evaluates both barriers and
 * fits the constants.  x0 is the area barycenter of the mesh.
 */
BarrierField build_barriers(const Lagrangian& f, double alpha, const Mesh& mesh,
                            const VecX& phi);

/** Supremum of the boundary supporting planes; Lipschitz of rank L. */
struct LowerBarrier {
  VecX ell;
  double L = 0.0;
};

/**
 * ell(x) = max over boundary samples gamma of phi(gamma) + z_gamma . (x - gamma),
 * with the slopes taken from a passing slope-condition report.  Agrees with
 * phi on the boundary because every competing plane stays below phi there.
 */
LowerBarrier build_lower_barrier(const LBSCReport& lbsc, const VecX& phi, const Mesh& mesh);

/**
 * Per-vertex margins of the three comparison inequalities.  The lower-plane
 * inequality ell <= u is only a theorem for nonpositive forcing, so its
 * verdict is gated on max g <= 0 and reported informationally otherwise.
 */
struct ComparisonReport {
  VecX lower_margin;  // u - (omega_plus + c1)
  VecX upper_margin;  // (omega_minus + c2) - u
  VecX ell_margin;    // u - ell
  double min_lower = 0.0;
  double min_upper = 0.0;
  double min_ell = 0.0;
  bool sandwich_pass = false;
  bool ell_checked = false;  // true when g <= 0 everywhere
  bool ell_pass = false;
  bool pass = false;  // sandwich and, when checked, the lower plane
  double tol = 0.0;
};

ComparisonReport verify_comparison(const VecX& u, const BarrierField& barriers,
                                   const LowerBarrier& lower, const VecX& g, double tol);

}  // namespace liplab
