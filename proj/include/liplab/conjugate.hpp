#pragma once

#include <cstdint>
#include <vector>

#include "liplab/lagrangian.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Node values of a discrete Legendre transform on a uniform box.
 *
 * `values(i, j)` is the transform at `box.node(i, j)`.  `finite_mask(i, j)`
 * is 1 when the defining maximum was attained strictly inside the input
 * box, i.e. the node value is trustworthy rather than clipped by the
 * sampling window.
 */
struct ConjugateGrid {
  Box2 box;
  MatX values;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> finite_mask;

  /** Bilinear interpolation; throws contract_error outside the box. */
  double eval(const Vec2& zeta) const;
  /** True when every node of the cell containing `zeta` is trustworthy. */
  bool covered(const Vec2& zeta) const;
  double coverage_fraction() const;
};

/**
 * Exact discrete conjugate sup_{nodes x of `primal`} (zeta . x - data(x))
 * evaluated at every node of `dual`.  Factorizes into two passes of a 1-D
 * transform; result matches the brute-force double loop to roundoff.
 */
ConjugateGrid conjugate_of_grid(const MatX& data, const Box2& primal, const Box2& dual);

/** `conjugate_of_grid` applied to f sampled at the primal nodes. */
ConjugateGrid conjugate(const Lagrangian& f, const Box2& primal, const Box2& dual);

/**
 * Discrete biconjugate: conjugate twice, landing back on the primal nodes.
 * Values never exceed the sampled f at the same node (up to roundoff).
 */
ConjugateGrid biconjugate(const Lagrangian& f, const Box2& primal, const Box2& dual);

/**
 * Direct node samples of f with full coverage.  Carries a closed-form
 * envelope into the grid interface without the transform's slope
 * quantization or window clipping.
 */
ConjugateGrid sampled_grid(const Lagrangian& f, const Box2& box);

/**
 * True when the conjugate of f stays attained-inside on the dual boxes of
 * radius `dual_radius` and `2 * dual_radius`; the primal window grows until
 * the argmax detaches from its boundary (up to a cap).
 */
bool superlinear_probe(const Lagrangian& f, double dual_radius, int n = 129);

/**
 * 1-D building block: out[l] = max_j (slopes[l] * nodes[j] - data[j]) with
 * the maximizing j stored in `argmax`.  `nodes` and `slopes` must be
 * strictly increasing.  Linear time via the lower convex hull of
 * (nodes[j], data[j]).
 */
void legendre_1d(const VecX& nodes, const VecX& data, const VecX& slopes, VecX& out,
                 std::vector<int>& argmax);

}  // namespace liplab
