#pragma once

#include <array>
#include <optional>
#include <vector>

#include "liplab/conjugate.hpp"
#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/solver.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * One connected component of {f > f** + tol_gap} in gradient space,
 * represented by the convex hull of the grid nodes inside it.  The hull is
 * CCW and convex by construction; convex_ok records whether the component
 * itself filled its hull up to grid resolution, so a false value means the
 * nonconvexity region is not a disjoint union of convex sets and the
 * pyramidal machinery does not apply to this integrand.
 */
struct NonconvexSet {
  int index = 0;
  std::vector<Vec2> hull;       // CCW, at least 3 vertices
  double hull_area = 0.0;
  double cell_area = 0.0;       // component node count times one grid cell
  double disjoint_margin = 0.0; // min hull-to-hull distance to the other components
  double grid_delta = 0.0;      // detection resolution, max of the two grid spacings
  bool convex_ok = false;

  // Signed distance to the hull boundary, positive inside.
  double edge_distance(const Vec2& xi) const;
  // Largest |xi - p| over hull vertices p; for interior xi this is the
  // supremum of distances to the whole boundary.
  double vertex_max_distance(const Vec2& xi) const;
  bool contains(const Vec2& xi, double clearance = 0.0) const;
};

struct ComponentReport {
  std::vector<NonconvexSet> components;
  double tol_gap = 0.0;
  bool hypothesis_ok = false; // every component convex, closures pairwise disjoint
};

/**
 * Flood-fills {f - fss > tol_gap} over the nodes of the biconjugate grid
 * (4-neighbor adjacency) and hulls each component.  A hull that exceeds its
 * component by more than the grid slack, or two components with touching
 * closures, clears hypothesis_ok.
 */
ComponentReport detect_components(const Lagrangian& f, const ConjugateGrid& fss,
                                  double tol_gap);

struct PatchOptions {
  double delta_min_factor = 2.0;  // require delta > factor * grid_delta
  double jump_factor = 0.5;       // 1-ring gradient jumps at most factor * delta
  double rho_floor_factor = 2.0;  // smallest admissible rho, in max edge lengths
  int n_rotations = 16;           // simplex ray rotations sampled over [0, 2pi/3)
};

/**
 * Pyramid surgery data at a seed triangle barycenter.  The simplex points
 * xi_j sit on the shifted component boundary at mutual 120-degree rays, the
 * rotation chosen to maximize delta_eff, the inradius of their hull about the
 * origin.  delta_eff replaces delta in every inequality that lower-bounds
 * v(x) = sup_j xi_j . x, since only delta_eff |x| <= v(x) is valid for a
 * three-point simplex.  The patch stores the pyramid trace on the vertices it
 * moves; interior vertices only, so boundary data survives application.
 */
struct SurgeryPatch {
  Vec2 center = Vec2::Zero();
  int seed_triangle = -1;
  int component = -1;
  int sign = 0;           // sign of g near the center; +1 lowers u, -1 raises it
  double rho = 0.0;       // accepted dyadic radius, B_rho(center) inside the domain
  double delta = 0.0;
  double delta_prime = 0.0;
  double delta_eff = 0.0;
  std::array<Vec2, 3> xi{};
  Vec3 lambda = Vec3::Zero();
  Vec2 grad_center = Vec2::Zero();
  double u_center = 0.0;
  std::vector<int> changed_vertices; // strictly moved by the pyramid, ascending
  VecX w_values;                     // pyramid trace, aligned with changed_vertices
  std::vector<int> ball_vertices;    // all mesh vertices inside B_rho, ascending
  std::vector<int> e_triangles;      // triangles of E_rho = {w <= u} cap B_rho
  double e_area = 0.0;
  double density_ratio = 0.0;        // e_area / (pi rho^2)
};

/**
 * Builds the surgery at the barycenter of seed_tri against component S.
 * Returns nothing when the seed is not a usable density point: gradient too
 * close to the hull boundary, 1-ring jumps too large, no dyadic radius
 * satisfying both linearization bounds
 *   u <= tangent + (delta_eff / 2) |x - center|   and
 *   u >= tangent - (delta_prime / 2) |x - center|
 * at every vertex of the ball, or a pyramid that moves no vertex.
 */
std::optional<SurgeryPatch> build_patch(const SolveResult& u, int seed_tri,
                                        const NonconvexSet& S, int g_sign,
                                        const Mesh& mesh,
                                        const PatchOptions& opts = {});

/** min(u, w) over the patch vertices for sign > 0, max for sign < 0. */
VecX apply_patch(const VecX& u, const SurgeryPatch& patch);

/**
 * The two inequalities behind the energy decrease, integrated over the
 * triangles the patch moved.  claim1 compares the relaxed integrand before
 * and after; claim2_margin is the lumped integral of g (u - u_tilde), whose
 * proof-level floor (half the center forcing times delta_eff rho / 6 times
 * the inner ball area) is reported alongside.  strict_decrease is the
 * margin's sign; with zero forcing the surgery is admissible but cannot win.
 */
struct PatchVerdict {
  double claim1_lhs = 0.0;
  double claim1_rhs = 0.0;
  bool claim1_ok = false;
  double claim2_margin = 0.0;
  double claim2_bound = 0.0;
  bool claim2_ok = false;
  bool strict_decrease = false;
};

PatchVerdict verify_energy_decrease(const VecX& u, const VecX& u_tilde,
                                    const SurgeryPatch& patch, const ConjugateGrid& fss,
                                    const VecX& g, const Mesh& mesh, double tol = 1e-9);

struct RepairOptions {
  double tol_gap = 1e-6;   // component detection threshold
  double tol_area = 0.01;  // acceptable offending area fraction
  int max_passes = 40;
  PatchOptions patch;
};

/**
 * Greedy Vitali repair.  Each pass walks the offending triangles in index
 * order, builds patches at density seeds (full 2-ring gradients inside the
 * closed hull of one component) against the frozen pass-start field, and
 * accepts a patch when
 * its linear gain strictly exceeds any claim1 deficit and its changed
 * vertices stay a triangle ring away from every patch accepted earlier in
 * the pass.  The disjoint family is applied jointly at pass end, so the
 * per-patch energy decreases add up exactly; passes repeat until the
 * offending fraction drops below tol_area, a pass accepts nothing, or the
 * pass budget runs out.  success reflects the area target alone; a partial
 * repair still returns the improved field and the full pass log.
 */
struct RepairReport {
  VecX u_repaired;
  std::vector<SurgeryPatch> patches;
  std::vector<PatchVerdict> verdicts;
  ComponentReport components;
  double offending_before = 0.0; // area fractions
  double offending_after = 0.0;
  std::vector<double> offending_per_pass; // fraction after each pass
  double energy_before = 0.0; // relaxed energy: integral of fss(grad) + g u
  double energy_after = 0.0;
  double bipolar_gap = 0.0;   // integral of f - fss over the non-offending triangles
  double min_density_ratio = 0.0;
  int passes = 0;
  bool success = false;
};

RepairReport vitali_repair(const SolveResult& result, const LagrangianPtr& f,
                           const ConjugateGrid& fss, const VecX& g, const Mesh& mesh,
                           const RepairOptions& opts = {});

}  // namespace liplab
