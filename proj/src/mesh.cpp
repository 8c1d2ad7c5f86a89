#include "liplab/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <random>

namespace liplab {

namespace {

inline Vec2 rot90(const Vec2& v) { return Vec2(-v.y(), v.x()); }

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Triangulates the band between an inner closed loop A and an outer closed
// loop B.  Both loops are CCW and carry a monotone parameter in [0,1) with
// aligned origin; the merge walks both loops once and emits nA+nB CCW
// triangles.  Ties advance the inner loop, which keeps the pattern stable
// when both loops share the same parameters (polygon layers).
void stitch_rings(const std::vector<int>& A, const std::vector<double>& tA,
                  const std::vector<int>& B, const std::vector<double>& tB,
                  std::vector<Tri>& out) {
  const int na = static_cast<int>(A.size());
  const int nb = static_cast<int>(B.size());
  auto pa = [&](int i) { return tA[i % na] + std::floor(double(i) / na); };
  auto pb = [&](int i) { return tB[i % nb] + std::floor(double(i) / nb); };
  int a = 0, b = 0;
  while (a < na || b < nb) {
    const double next_a = (a < na) ? pa(a + 1) : std::numeric_limits<double>::infinity();
    const double next_b = (b < nb) ? pb(b + 1) : std::numeric_limits<double>::infinity();
    if (next_a <= next_b) {
      out.emplace_back(A[a % na], B[b % nb], A[(a + 1) % na]);
      ++a;
    } else {
      out.emplace_back(A[a % na], B[b % nb], B[(b + 1) % nb]);
      ++b;
    }
  }
}

// Unit-disc mesh out of m concentric rings, ring i holding 6i vertices.
// Vertices land exactly on the unit circle for the outermost ring.
void build_unit_disc(int m, std::vector<Vec2>& verts, std::vector<Tri>& tris,
                     std::vector<int>& loop) {
  verts.emplace_back(0.0, 0.0);
  std::vector<std::vector<int>> rings(m + 1);
  std::vector<std::vector<double>> params(m + 1);
  rings[0] = {0};
  params[0] = {0.0};
  for (int i = 1; i <= m; ++i) {
    const int n = 6 * i;
    const double r = double(i) / m;
    rings[i].reserve(n);
    params[i].reserve(n);
    for (int j = 0; j < n; ++j) {
      const double th = 2.0 * M_PI * j / n;
      rings[i].push_back(static_cast<int>(verts.size()));
      verts.emplace_back(r * std::cos(th), r * std::sin(th));
      params[i].push_back(double(j) / n);
    }
  }
  for (int j = 0; j < 6; ++j)
    tris.emplace_back(0, rings[1][j], rings[1][(j + 1) % 6]);
  for (int i = 1; i < m; ++i)
    stitch_rings(rings[i], params[i], rings[i + 1], params[i + 1], tris);
  loop = rings[m];
}

double polygon_area(const std::vector<Vec2>& p) {
  double s = 0.0;
  const int n = static_cast<int>(p.size());
  for (int i = 0; i < n; ++i) s += cross2(p[i], p[(i + 1) % n]);
  return 0.5 * s;
}

Vec2 polygon_centroid(const std::vector<Vec2>& p) {
  const int n = static_cast<int>(p.size());
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (int i = 0; i < n; ++i) {
    const double w = cross2(p[i], p[(i + 1) % n]);
    a += w;
    c += w * (p[i] + p[(i + 1) % n]);
  }
  return c / (3.0 * a);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

DomainSpec DomainSpec::disc(const Vec2& c, double r, double h) {
  DomainSpec s;
  s.kind = Kind::disc;
  s.center = c;
  s.radius = r;
  s.h = h;
  return s;
}

DomainSpec DomainSpec::ellipse(const Vec2& c, const Vec2& ab, double h) {
  DomainSpec s;
  s.kind = Kind::ellipse;
  s.center = c;
  s.semi_axes = ab;
  s.h = h;
  return s;
}

DomainSpec DomainSpec::polygon(std::vector<Vec2> verts, double h) {
  DomainSpec s;
  s.kind = Kind::polygon;
  s.vertices = std::move(verts);
  s.h = h;
  return s;
}

bool Mesh::is_boundary(int v) const {
  return std::binary_search(boundary_vertices.begin(), boundary_vertices.end(), v);
}

double Mesh::tri_area(int t) const {
  const Tri& T = triangles[t];
  return 0.5 * cross2(vertices[T[1]] - vertices[T[0]], vertices[T[2]] - vertices[T[0]]);
}

Vec2 Mesh::tri_barycenter(int t) const {
  const Tri& T = triangles[t];
  return (vertices[T[0]] + vertices[T[1]] + vertices[T[2]]) / 3.0;
}

Vec2 Mesh::hat_gradient(int t, int i) const {
  const Tri& T = triangles[t];
  const Vec2 e = vertices[T[(i + 2) % 3]] - vertices[T[(i + 1) % 3]];
  return rot90(e) / (2.0 * tri_area(t));
}

double Mesh::max_edge_length() const {
  double m = 0.0;
  for (const Tri& T : triangles)
    for (int i = 0; i < 3; ++i)
      m = std::max(m, (vertices[T[i]] - vertices[T[(i + 1) % 3]]).norm());
  return m;
}

Mesh triangulate(const DomainSpec& spec) {
  if (!(spec.h > 0.0)) throw contract_error("triangulate: h must be positive");
  Mesh mesh;
  mesh.h = spec.h;

  if (spec.kind == DomainSpec::Kind::disc || spec.kind == DomainSpec::Kind::ellipse) {
    const Vec2 ab = (spec.kind == DomainSpec::Kind::disc)
                        ? Vec2(spec.radius, spec.radius)
                        : spec.semi_axes;
    if (!(ab.x() > 0.0 && ab.y() > 0.0))
      throw contract_error("triangulate: radius/semi-axes must be positive");
    const int m = std::max(1, static_cast<int>(std::ceil(ab.maxCoeff() / spec.h)));
    build_unit_disc(m, mesh.vertices, mesh.triangles, mesh.boundary_loop);
    for (Vec2& v : mesh.vertices)
      v = spec.center + Vec2(ab.x() * v.x(), ab.y() * v.y());
  } else {
    const auto& poly = spec.vertices;
    const int np = static_cast<int>(poly.size());
    if (np < 3) throw contract_error("triangulate: polygon needs at least 3 vertices");
    if (polygon_area(poly) <= 0.0)
      throw contract_error("triangulate: polygon must be CCW with positive area");
    double scale = 0.0;
    for (const Vec2& p : poly) scale = std::max(scale, (p - poly[0]).norm());
    for (int i = 0; i < np; ++i) {
      const Vec2 e0 = poly[(i + 1) % np] - poly[i];
      const Vec2 e1 = poly[(i + 2) % np] - poly[(i + 1) % np];
      if (cross2(e0, e1) <= 1e-12 * scale * scale)
        throw contract_error("triangulate: polygon must be strictly convex");
    }

    // boundary loop: each edge subdivided into chunks no longer than 0.75h,
    // which together with the layer step keeps every mesh edge below 1.5h
    const double step = 0.75 * spec.h;
    std::vector<Vec2> bpts;
    double perim = 0.0;
    for (int i = 0; i < np; ++i) perim += (poly[(i + 1) % np] - poly[i]).norm();
    std::vector<double> bparam;
    double acc = 0.0;
    for (int i = 0; i < np; ++i) {
      const Vec2 a = poly[i], e = poly[(i + 1) % np] - poly[i];
      const int ne = std::max(1, static_cast<int>(std::ceil(e.norm() / step)));
      for (int k = 0; k < ne; ++k) {
        bpts.push_back(a + (double(k) / ne) * e);
        bparam.push_back((acc + e.norm() * k / ne) / perim);
      }
      acc += e.norm();
    }
    const int nb = static_cast<int>(bpts.size());

    const Vec2 c = polygon_centroid(poly);
    double rmax = 0.0;
    for (const Vec2& p : bpts) rmax = std::max(rmax, (p - c).norm());
    const int m = std::max(1, static_cast<int>(std::ceil(rmax / step)));

    mesh.vertices.push_back(c);
    std::vector<std::vector<int>> layers(m + 1);
    layers[0] = {0};
    for (int j = 1; j <= m; ++j) {
      layers[j].reserve(nb);
      for (int i = 0; i < nb; ++i) {
        layers[j].push_back(static_cast<int>(mesh.vertices.size()));
        mesh.vertices.push_back(c + (double(j) / m) * (bpts[i] - c));
      }
    }
    for (int i = 0; i < nb; ++i)
      mesh.triangles.emplace_back(0, layers[1][i], layers[1][(i + 1) % nb]);
    for (int j = 1; j < m; ++j)
      stitch_rings(layers[j], bparam, layers[j + 1], bparam, mesh.triangles);
    mesh.boundary_loop = layers[m];
  }

  mesh.boundary_vertices = mesh.boundary_loop;
  std::sort(mesh.boundary_vertices.begin(), mesh.boundary_vertices.end());

  mesh.area = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const double a = mesh.tri_area(t);
    assert(a > 0.0);
    mesh.area += a;
  }

  // diameter is attained on the boundary of a convex domain
  mesh.diam = 0.0;
  const auto& loop = mesh.boundary_loop;
  for (size_t i = 0; i < loop.size(); ++i)
    for (size_t j = i + 1; j < loop.size(); ++j)
      mesh.diam = std::max(mesh.diam,
                           (mesh.vertices[loop[i]] - mesh.vertices[loop[j]]).norm());

  mesh.dist.resize(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v)
    mesh.dist[v] = boundary_distance(mesh, mesh.vertices[v]);
  return mesh;
}

double boundary_distance(const Mesh& mesh, const Vec2& p) {
  const auto& loop = mesh.boundary_loop;
  const int n = static_cast<int>(loop.size());
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    d = std::min(d, point_segment_distance(p, mesh.vertices[loop[i]],
                                           mesh.vertices[loop[(i + 1) % n]]));
  return d;
}

UniformConvexityReport check_uniform_convexity(const Mesh& mesh, double R, int n_samples) {
  if (n_samples < 8) throw contract_error("check_uniform_convexity: n_samples >= 8 required");
  const auto& loop = mesh.boundary_loop;
  const int nl = static_cast<int>(loop.size());
  const int ns = std::min(n_samples, nl);

  UniformConvexityReport rep;
  rep.R = R;
  rep.tolerance = 1e-9 * mesh.diam * mesh.diam;

  rep.sample_ids.reserve(ns);
  for (int k = 0; k < ns; ++k) rep.sample_ids.push_back(k * nl / ns);

  rep.normals.reserve(ns);
  for (int k = 0; k < ns; ++k) {
    const int i = rep.sample_ids[k];
    const Vec2 prev = mesh.vertices[loop[(i + nl - 1) % nl]];
    const Vec2 cur = mesh.vertices[loop[i]];
    const Vec2 next = mesh.vertices[loop[(i + 1) % nl]];
    // interior lies left of the CCW loop, so the inward edge normal is rot90
    const Vec2 n0 = rot90((cur - prev).normalized());
    const Vec2 n1 = rot90((next - cur).normalized());
    Vec2 b = n0 + n1;
    if (b.norm() < 1e-14) b = n0; else b.normalize();
    rep.normals.push_back(b);
  }

  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ns; ++k) {
    const Vec2 g = mesh.vertices[loop[rep.sample_ids[k]]];
    for (int l = 0; l < ns; ++l) {
      if (l == k) continue;
      const Vec2 gp = mesh.vertices[loop[rep.sample_ids[l]]];
      const double margin = R * rep.normals[k].dot(gp - g) - 0.5 * (gp - g).squaredNorm();
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_gamma = rep.sample_ids[k];
        rep.worst_gamma_prime = rep.sample_ids[l];
      }
    }
  }
  rep.pass = rep.worst_margin >= -rep.tolerance;
  return rep;
}

std::optional<Vec2> min_norm_feasible(const std::vector<Vec2>& dirs, const VecX& offsets) {
  const int n = static_cast<int>(dirs.size());
  assert(offsets.size() == n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  // portable Fisher-Yates; fixed seed keeps runs reproducible
  std::mt19937 rng(0x5bd1e995u);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<unsigned>(i + 1));
    std::swap(order[i], order[j]);
  }

  Vec2 z = Vec2::Zero();
  for (int s = 0; s < n; ++s) {
    const int i = order[s];
    const double scale = 1.0 + std::abs(offsets[i]) + z.norm();
    if (z.dot(dirs[i]) <= offsets[i] + 1e-13 * scale) continue;

    // optimum moves onto the line z . d = b; minimize |t| along it subject
    // to the constraints seen so far
    const Vec2 d = dirs[i];
    const double nd2 = d.squaredNorm();
    if (nd2 < 1e-30) {
      if (offsets[i] < 0.0) return std::nullopt;
      continue;
    }
    const Vec2 p = (offsets[i] / nd2) * d;
    const Vec2 u = rot90(d) / std::sqrt(nd2);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int q = 0; q < s; ++q) {
      const int j = order[q];
      const double a = u.dot(dirs[j]);
      const double rhs = offsets[j] - p.dot(dirs[j]);
      const double sc = 1e-13 * (1.0 + std::abs(offsets[j]) + p.norm());
      if (std::abs(a) <= 1e-14) {
        if (rhs < -sc) return std::nullopt;
        continue;
      }
      if (a > 0.0) hi = std::min(hi, rhs / a);
      else lo = std::max(lo, rhs / a);
    }
    if (lo > hi + 1e-12 * (1.0 + std::abs(lo) + std::abs(hi))) return std::nullopt;
    if (lo > hi) hi = lo;  // interval collapsed within tolerance
    const double t = std::clamp(0.0, lo, hi);
    z = p + t * u;
  }
  return z;
}

LBSCReport check_lbsc(const Mesh& mesh, const VecX& phi, double M) {
  const auto& loop = mesh.boundary_loop;
  const int n = static_cast<int>(loop.size());
  if (phi.size() != n)
    throw contract_error("check_lbsc: phi must hold one value per boundary-loop vertex");

  LBSCReport rep;
  rep.M = M;
  rep.slopes.assign(n, Vec2::Zero());
  rep.minimal_rank = 0.0;

  std::vector<Vec2> dirs;
  dirs.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    const Vec2 g = mesh.vertices[loop[i]];
    dirs.clear();
    VecX offs(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Vec2 d = mesh.vertices[loop[j]] - g;
      const double len = d.norm();
      if (len < 1e-15) continue;
      // normalized so the feasibility tolerance is scale-free
      dirs.push_back(d / len);
      offs[static_cast<int>(dirs.size()) - 1] = (phi[j] - phi[i]) / len;
    }
    auto z = min_norm_feasible(dirs, offs.head(static_cast<int>(dirs.size())));
    if (!z) {
      rep.feasible = false;
      rep.minimal_rank = std::numeric_limits<double>::infinity();
      rep.worst_gamma = i;
      break;
    }
    rep.slopes[i] = *z;
    if (z->norm() > rep.minimal_rank) {
      rep.minimal_rank = z->norm();
      rep.worst_gamma = i;
    }
  }
  rep.pass = rep.feasible && rep.minimal_rank <= M + 1e-9 * (1.0 + M);
  return rep;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  Vec2 hi = mesh.vertices[0];
  lo_ = mesh.vertices[0];
  for (const Vec2& v : mesh.vertices) {
    lo_ = lo_.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  cell_ = std::max(mesh.max_edge_length(), 1e-12);
  nx_ = std::max(1, int((hi.x() - lo_.x()) / cell_) + 1);
  ny_ = std::max(1, int((hi.y() - lo_.y()) / cell_) + 1);
  bins_.resize(size_t(nx_) * ny_);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    Vec2 tlo = mesh.vertices[mesh.triangles[t][0]], thi = tlo;
    for (int i = 1; i < 3; ++i) {
      const Vec2& p = mesh.vertices[mesh.triangles[t][i]];
      tlo = tlo.cwiseMin(p);
      thi = thi.cwiseMax(p);
    }
    int i0 = int((tlo.x() - lo_.x()) / cell_), i1 = int((thi.x() - lo_.x()) / cell_);
    int j0 = int((tlo.y() - lo_.y()) / cell_), j1 = int((thi.y() - lo_.y()) / cell_);
    for (int i = std::max(0, i0); i <= std::min(nx_ - 1, i1); ++i)
      for (int j = std::max(0, j0); j <= std::min(ny_ - 1, j1); ++j)
        bins_[size_t(i) * ny_ + j].push_back(t);
  }
}

int PointLocator::find(const Vec2& p) const {
  int i = int((p.x() - lo_.x()) / cell_), j = int((p.y() - lo_.y()) / cell_);
  if (i < 0 || i >= nx_ || j < 0 || j >= ny_) return -1;
  const double tol = -1e-12 * (1.0 + mesh_->diam);
  for (int t : bins_[size_t(i) * ny_ + j]) {
    const Tri& T = mesh_->triangles[t];
    const Vec2& a = mesh_->vertices[T[0]];
    const Vec2& b = mesh_->vertices[T[1]];
    const Vec2& c = mesh_->vertices[T[2]];
    double den = cross2(b - a, c - a);
    double w0 = cross2(b - p, c - p) / den;
    double w1 = cross2(c - p, a - p) / den;
    double w2 = 1.0 - w0 - w1;
    if (w0 >= tol && w1 >= tol && w2 >= tol) return t;
  }
  return -1;
}

double PointLocator::eval(const VecX& field, const Vec2& p) const {
  int t = find(p);
  if (t < 0) throw contract_error("PointLocator: query point lies outside the mesh");
  const Tri& T = mesh_->triangles[t];
  const Vec2& a = mesh_->vertices[T[0]];
  const Vec2& b = mesh_->vertices[T[1]];
  const Vec2& c = mesh_->vertices[T[2]];
  double den = cross2(b - a, c - a);
  double w0 = cross2(b - p, c - p) / den;
  double w1 = cross2(c - p, a - p) / den;
  return w0 * field[T[0]] + w1 * field[T[1]] + (1.0 - w0 - w1) * field[T[2]];
}

}  // namespace liplab
