#pragma once

#include <array>
#include <optional>
#include <vector>

#include "liplab/types.hpp"

namespace liplab {

/**
 * Description of a bounded convex planar domain.
 *
 * Three kinds are supported: disc (center, radius), axis-aligned ellipse
 * (center, semi-axes) and convex polygon (CCW vertex list).  `h` is the
 * target mesh size; generated edges never exceed 1.5*h.
 */
struct DomainSpec {
  enum class Kind { disc, ellipse, polygon };
  Kind kind = Kind::disc;
  Vec2 center = Vec2::Zero();
  double radius = 1.0;                // disc
  Vec2 semi_axes = Vec2(1.0, 1.0);    // ellipse
  std::vector<Vec2> vertices;         // polygon, CCW
  double h = 0.1;

  static DomainSpec disc(const Vec2& c, double r, double h);
  static DomainSpec ellipse(const Vec2& c, const Vec2& ab, double h);
  static DomainSpec polygon(std::vector<Vec2> verts, double h);
};

/**
 * Conforming triangulation of a DomainSpec.
 *
 * Triangles are positively oriented vertex index triples.  `boundary_loop`
 * lists the boundary vertices in CCW order; `boundary_vertices` is the same
 * set (kept separately because callers often only need membership).  `dist`
 * holds the exact distance of each vertex to the boundary polyline.
 */
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<Tri> triangles;
  std::vector<int> boundary_vertices;
  std::vector<int> boundary_loop;
  VecX dist;
  double diam = 0.0;
  double area = 0.0;
  double h = 0.0;  // target size the mesh was built for

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  bool is_boundary(int v) const;

  double tri_area(int t) const;
  Vec2 tri_barycenter(int t) const;
  /** Gradient of the hat function of local vertex `i` (0..2) on triangle `t`. */
  Vec2 hat_gradient(int t, int i) const;
  double max_edge_length() const;
};

/** Builds the mesh.  Deterministic; area/diam invariant under rigid motion of the spec. */
Mesh triangulate(const DomainSpec& spec);

/**
 * Uniform-grid point location over a triangulation.  Queries on edges or
 * vertices resolve to the lowest-index containing triangle.
 */
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  /** Index of a triangle containing p, or -1 when p lies outside the mesh. */
  int find(const Vec2& p) const;
  /** Linear interpolation of a vertex field at p; throws when p is outside. */
  double eval(const VecX& field, const Vec2& p) const;

 private:
  const Mesh* mesh_;
  Vec2 lo_;
  int nx_ = 0, ny_ = 0;
  double cell_ = 0.0;
  std::vector<std::vector<int>> bins_;
};

/** Distance from `p` to the boundary polyline of `mesh` (exact, brute force). */
double boundary_distance(const Mesh& mesh, const Vec2& p);

/**
 * Verdict for the R-uniform convexity test
 *   R * b_gamma . (gamma' - gamma) >= 0.5 |gamma' - gamma|^2
 * over sampled boundary pairs, with b_gamma the inward unit normal estimated
 * from the two boundary edges adjacent to the sample.
 */
struct UniformConvexityReport {
  bool pass = false;
  double R = 0.0;
  double worst_margin = 0.0;     // min over pairs of lhs - rhs
  int worst_gamma = -1;          // boundary-loop position of the worst pair
  int worst_gamma_prime = -1;
  double tolerance = 0.0;
  std::vector<Vec2> normals;     // b_gamma per sample
  std::vector<int> sample_ids;   // boundary-loop positions that were sampled
};

/** Exhaustive pairwise check over n_samples boundary samples (n_samples >= 8). */
UniformConvexityReport check_uniform_convexity(const Mesh& mesh, double R, int n_samples);

/**
 * Verdict for the lower-bounded-slope condition of a boundary trace phi:
 * for each boundary sample gamma there must be z with |z| <= M and
 *   phi(gamma) + z . (gamma' - gamma) <= phi(gamma')   for all samples gamma'.
 *
 * minimal_rank is max over gamma of the norm of the smallest feasible z
 * (the least M for which the condition holds on the sampled boundary).
 */
struct LBSCReport {
  bool pass = false;
  double M = 0.0;
  double minimal_rank = 0.0;
  bool feasible = true;          // false if some sample admits no z at all
  int worst_gamma = -1;          // loop position attaining minimal_rank
  std::vector<Vec2> slopes;      // witness z_gamma per boundary-loop vertex
};

/** phi holds one value per boundary_loop entry, in loop order. */
LBSCReport check_lbsc(const Mesh& mesh, const VecX& phi, double M);

/**
 * Smallest-norm point of { z : z . d_j <= b_j for all j }.
 * Returns nullopt when the constraint set is empty.  Randomized incremental
 * with a fixed permutation seed, so results are deterministic.
 */
std::optional<Vec2> min_norm_feasible(const std::vector<Vec2>& dirs, const VecX& offsets);

}  // namespace liplab
