#pragma once

#include <vector>

#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/smoothing.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Discrete energy of the piecewise-linear ansatz on a triangulation,
 *   E(u) = sum_T area(T) f(grad u|_T) + sum_v m_v g_v u_v,
 * with lumped vertex masses m_v = sum_{T around v} area(T)/3 (the vertex-mean
 * quadrature of g u per triangle).  Boundary degrees of freedom are pinned to
 * phi, one value per boundary_loop entry in loop order.
 */
struct DiscreteFunctional {
  const Mesh* mesh = nullptr;
  LagrangianPtr f;
  VecX g;
  VecX phi;
  VecX mass;
  bool growth_unverified = false;  // f carries no superlinear growth metadata
};

DiscreteFunctional assemble(const Mesh& mesh, const LagrangianPtr& f, const VecX& g,
                            const VecX& phi);

/** E(u) exactly as assembled; u is a full per-vertex field. */
double energy_of(const DiscreteFunctional& functional, const VecX& u);

/** Exact gradient of the piecewise-linear interpolant, one vector per triangle. */
std::vector<Vec2> gradient_field(const Mesh& mesh, const VecX& u);

struct SolveOptions {
  int max_iters = 60000;
  double tol_rel = 1e-12;  // window decrease threshold, relative to max(1, |E|)
  int window = 50;
};

struct SolveResult {
  VecX u;
  std::vector<Vec2> grad;
  double energy = 0.0;
  int iterations = 0;
  double rel_decrease_last = 0.0;  // decrease over the last full window
  bool converged = false;
  double sup_norm = 0.0;
  double stationarity = 0.0;  // sup norm of the interior energy gradient at u
};

/**
 * Monotone accelerated descent with a backtracked curvature estimate and
 * momentum restarts.  Accepted iterates never increase the energy, and the
 * iteration is deterministic for fixed inputs.  `init` seeds the interior
 * (boundary entries are overwritten by phi); by default the interior starts
 * at the mean boundary value.
 */
SolveResult minimize(const DiscreteFunctional& functional, const SolveOptions& opts = {},
                     const VecX* init = nullptr);

/** One regularization level of the outer loop. */
struct SequenceStep {
  int k = 0;
  SolveResult result;
  double energy_true = 0.0;  // raw-f, raw-g energy at this level's minimizer
  double g_gap = 0.0;        // sup norm of g_k - g
  double band = 0.0;         // delta_k area + 2 g_gap u0 area + D(u_last)/k
};

struct SequenceReport {
  std::vector<SequenceStep> steps;
  double u0 = 0.0;              // sup-norm budget the bands were computed with
  double worst_increase = 0.0;  // largest consecutive rise of energy_true
  bool truncated = false;       // a level failed to converge and ended the loop
};

/**
 * Minimizes the regularized energies h_k = f_k + |xi|^2/k with averaged
 * forcing g_k level by level, warm starting from the previous minimizer.
 * energy_true is evaluated with the raw f and g; the band certifies
 * |energy_true(k) - energy_true(last)| <= band with D the Dirichlet integral
 * of the last minimizer.  Pass u0 > 0 (the barrier sandwich bound) to pin the
 * budget; otherwise the largest observed sup norm is used.
 */
SequenceReport minimizing_sequence(const LagrangianPtr& f, const VecX& g, const VecX& phi,
                                   const SmoothingSchedule& schedule, const Mesh& mesh,
                                   const SolveOptions& opts = {}, double u0 = 0.0,
                                   const VecX* init = nullptr);

}  // namespace liplab
