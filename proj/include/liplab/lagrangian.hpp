#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "liplab/types.hpp"

namespace liplab {

/** Pointwise lower bound f(xi) >= c |xi|^p, claimed for every xi. */
struct PGrowth {
  double c = 0.0;
  double p = 2.0;
};

/**
 * Integrand f : R^2 -> R of the variational energy.
 *
 * Catalog members are finite everywhere, nonnegative, and vanish at the
 * origin.  `meta.r` and `meta.eps` describe the ball outside which the
 * midpoint convexity gain (eps/2) theta (1-theta) |xi - zeta|^2 holds when
 * |xi| > r + 1; they are data, not promises, and are re-checked by
 * `check_hypotheses`.
 */
class Lagrangian {
 public:
  struct Meta {
    double r = 0.0;
    double eps = 0.0;
    std::optional<PGrowth> p_growth;
  };

  virtual ~Lagrangian() = default;

  virtual double operator()(const Vec2& xi) const = 0;
  virtual std::string name() const = 0;

  /** One element of the subdifferential at xi (any valid choice at kinks). */
  virtual Vec2 subgradient(const Vec2& xi) const;
  virtual bool has_subgradient() const { return false; }

  /** Radial structure f(xi) = psi(|xi|); enables closed-form Moreau steps. */
  virtual bool is_radial() const { return false; }
  virtual double radial_value(double t) const;
  /** d/dt psi(t) for t > 0 (any subderivative at kinks). */
  virtual double radial_slope(double t) const;
  /**
   * argmin_{s >= 0} psi(s) + (t - s)^2 / (2 mu) for t >= 0.
   * Default is a golden-section search; requires psi convex with min at 0.
   */
  virtual double radial_prox(double t, double mu) const;

  /** Convex envelope f** when available in closed form; null otherwise. */
  virtual std::shared_ptr<const Lagrangian> relaxation() const { return nullptr; }

  Meta meta;
};

using LagrangianPtr = std::shared_ptr<const Lagrangian>;

/** f(xi) = |xi|^2 / 2. */
LagrangianPtr make_quadratic();

/**
 * f(xi) = |xi| for |xi| <= 1, |xi|^2/2 + 1/2 otherwise.
 * Convex, kinked at 0, affine of slope 1 up to the unit sphere.
 */
LagrangianPtr make_torsion();

/** f(xi) = c |xi|^p with c > 0, p >= 1 (p = 1 gives the non-superlinear norm). */
LagrangianPtr make_pnorm(double c, double p);

/** f(xi) = (|xi|^2 - 1)^2; nonconvex well along the unit sphere. */
LagrangianPtr make_double_well();

/** Bilinear interpolation of node values on `box`; evaluation clamps to the box. */
LagrangianPtr make_tabulated(const Box2& box, const MatX& values, std::string name = "tabulated");

/** A sampled pair where the midpoint convexity gain failed. */
struct MidpointWitness {
  Vec2 xi = Vec2::Zero();
  Vec2 zeta = Vec2::Zero();
  double theta = 0.5;
  double margin = 0.0;
};

/** Outcome of the structural hypothesis checks on an integrand. */
struct ConvexityReport {
  bool zero_at_origin = false;      // f(0) = 0 and f >= 0 on the sample box
  bool finite_everywhere = false;   // finite at every sample
  bool convex_outside_ball = false; // midpoint gain holds when |xi| > r + 1
  bool superlinear = false;         // conjugate finite on expanding dual boxes

  double worst_margin = 0.0;          // most negative midpoint slack seen
  Vec2 worst_xi = Vec2::Zero();
  Vec2 worst_zeta = Vec2::Zero();
  double worst_theta = 0.5;

  // same scan with the constrained endpoint pushed past r + 2
  bool convex_outside_shifted_ball = false;
  double worst_margin_shifted = 0.0;

  std::vector<MidpointWitness> violations;  // capped sample of failing triples

  bool pass() const {
    return zero_at_origin && finite_everywhere && convex_outside_ball && superlinear;
  }
};

struct HypothesisOptions {
  int n_pairs = 20000;
  double tol = 1e-9;
  double dual_radius = 3.0;  // superlinearity probes |zeta| <= radius and 2 * radius
};

ConvexityReport check_hypotheses(const Lagrangian& f, const Box2& sample_box,
                                 const HypothesisOptions& opts = {});

/**
 * Most negative value over deterministic sample pairs of
 *   theta f(xi) + (1-theta) f(zeta) - f(theta xi + (1-theta) zeta)
 *     - (eps/2) theta (1-theta) |xi - zeta|^2,
 * theta in {1/4, 1/2, 3/4}, restricted to pairs whose larger-norm endpoint
 * exceeds `ball_radius`.  Nonnegative (up to roundoff) iff the gain holds.
 */
double midpoint_convexity_margin(const std::function<double(const Vec2&)>& f, double eps,
                                 double ball_radius, const Box2& sample_box, int n_pairs,
                                 Vec2* worst_xi = nullptr, Vec2* worst_zeta = nullptr,
                                 double* worst_theta = nullptr,
                                 std::vector<MidpointWitness>* violations = nullptr,
                                 double violation_threshold = -1e-9);

}  // namespace liplab
