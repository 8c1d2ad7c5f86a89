#pragma once

#include <vector>

#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Moreau envelope of a convex integrand at parameter mu = 1/k:
 *   f_k(xi) = min_s f(s) + |xi - s|^2 / (2 mu),
 * shifted so f_k(0) = 0.  The envelope is C^1, convex, sits in the band
 * f - delta_k <= f_k <= f, is nondecreasing in k, and keeps a quarter of
 * the convexity modulus outside a ball one unit wider than f's.
 *
 * Throws contract_error when f fails a midpoint convexity scan on `box`;
 * callers holding a nonconvex integrand must smooth its relaxation instead.
 */
LagrangianPtr smooth_lagrangian(const LagrangianPtr& f, int k, const Box2& box);

/** h_k = f_k + (1/k)|xi|^2; uniformly convex with modulus at least 2/k. */
LagrangianPtr regularize(const LagrangianPtr& f_k, int k);

/**
 * Tent-weighted vertex averaging of g with window sigma = diam / (8 sqrt(k)).
 * Normalized weights fix constants exactly and never raise the sup norm.
 */
VecX smooth_g(const VecX& g, int k, const Mesh& mesh);

struct SmoothingStep {
  int k = 0;
  double mu = 0.0;     // Moreau parameter 1/k
  double sigma = 0.0;  // averaging window for g
  double delta = 0.0;  // measured sup of f - f_k over the box nodes
};

/** Per-k parameters with the band delta_k measured a posteriori on `box`. */
struct SmoothingSchedule {
  std::vector<SmoothingStep> steps;
  Box2 box;  // gradient window the bands were measured on
};

SmoothingSchedule make_schedule(const std::vector<int>& ks, const LagrangianPtr& f,
                                const Box2& box, double diam);

}  // namespace liplab
