#include "doctest.h"

#include <cmath>
#include <set>

#include "liplab/mesh.hpp"

using namespace liplab;

TEST_CASE("unit disc meshes approximate area pi") {
  // coarse mesh: inscribed 12-gon, area 3.0, still within 5% of pi
  Mesh coarse = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 0.5));
  CHECK(std::abs(coarse.area - M_PI) / M_PI < 0.05);

  Mesh fine = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 1.0 / 64));
  CHECK(std::abs(fine.area - M_PI) / M_PI < 1e-3);
  CHECK(fine.max_edge_length() <= 1.5 / 64);
  // antipodal boundary vertices exist, so the diameter is exact
  CHECK(fine.diam == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("triangles are positively oriented and cover the domain") {
  Mesh mesh = triangulate(DomainSpec::disc(Vec2(0.3, -0.2), 0.8, 0.1));
  double sum = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const double a = mesh.tri_area(t);
    CHECK(a > 0.0);
    sum += a;
  }
  CHECK(sum == doctest::Approx(mesh.area).epsilon(1e-12));

  // boundary loop shoelace must equal the triangle-area sum
  double shoelace = 0.0;
  const auto& loop = mesh.boundary_loop;
  for (size_t i = 0; i < loop.size(); ++i) {
    const Vec2 a = mesh.vertices[loop[i]];
    const Vec2 b = mesh.vertices[loop[(i + 1) % loop.size()]];
    shoelace += 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  CHECK(std::abs(shoelace - mesh.area) <= 1e-12 * mesh.area);
}

TEST_CASE("rotated square polygon meshes exactly") {
  std::vector<Vec2> sq = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  Mesh mesh = triangulate(DomainSpec::polygon(sq, 0.25));
  CHECK(mesh.area == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(mesh.max_edge_length() <= 1.5 * 0.25);
  CHECK(mesh.diam == doctest::Approx(2.0));
}

TEST_CASE("area and diameter are invariant under rigid motions of the spec") {
  Mesh a = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 0.07));
  Mesh b = triangulate(DomainSpec::disc(Vec2(13.5, -2.25), 1.0, 0.07));
  CHECK(std::abs(a.area - b.area) < 1e-10);
  CHECK(std::abs(a.diam - b.diam) < 1e-10);

  std::vector<Vec2> sq = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  const double th = 0.7;
  std::vector<Vec2> sq_rot;
  for (const Vec2& p : sq)
    sq_rot.emplace_back(std::cos(th) * p.x() - std::sin(th) * p.y(),
                        std::sin(th) * p.x() + std::cos(th) * p.y());
  Mesh c = triangulate(DomainSpec::polygon(sq, 0.23));
  Mesh d = triangulate(DomainSpec::polygon(sq_rot, 0.23));
  CHECK(std::abs(c.area - d.area) < 1e-10);
  CHECK(std::abs(c.diam - d.diam) < 1e-10);
}

TEST_CASE("distance field vanishes on the boundary and is 1-Lipschitz") {
  Mesh mesh = triangulate(DomainSpec::ellipse(Vec2(0, 0), Vec2(1.2, 0.8), 0.1));
  for (int v : mesh.boundary_vertices) CHECK(mesh.dist[v] == 0.0);
  for (const Tri& T : mesh.triangles)
    for (int i = 0; i < 3; ++i) {
      const int u = T[i], w = T[(i + 1) % 3];
      const double edge = (mesh.vertices[u] - mesh.vertices[w]).norm();
      CHECK(std::abs(mesh.dist[u] - mesh.dist[w]) <= edge * (1 + 1e-12));
    }
  // interior distances are positive
  for (int v = 0; v < mesh.n_vertices(); ++v)
    if (!mesh.is_boundary(v)) CHECK(mesh.dist[v] > 0.0);
}

TEST_CASE("disc center distance equals the apothem of the boundary polygon") {
  Mesh mesh = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 0.125));
  const int nb = static_cast<int>(mesh.boundary_loop.size());
  CHECK(mesh.dist[0] == doctest::Approx(std::cos(M_PI / nb)).epsilon(1e-12));
}

TEST_CASE("uniform convexity verdicts on disc and square") {
  Mesh disc = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 1.0 / 32));

  auto ok = check_uniform_convexity(disc, 1.0, 256);
  CHECK(ok.pass);
  CHECK(std::abs(ok.worst_margin) < 1e-10);  // exact for the circle

  auto bad = check_uniform_convexity(disc, 0.5, 256);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_margin < -0.9);  // antipodal pair violates by ~1

  // radius slack below the sampling scale must be detected
  auto tight = check_uniform_convexity(disc, 1.0 - 10.0 / 128, 256);
  CHECK_FALSE(tight.pass);

  std::vector<Vec2> sq = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  Mesh square = triangulate(DomainSpec::polygon(sq, 0.25));
  CHECK_FALSE(check_uniform_convexity(square, 100.0, 64).pass);
  CHECK_FALSE(check_uniform_convexity(square, 1e6, 64).pass);
}

TEST_CASE("min_norm_feasible solves small instances exactly") {
  // origin feasible
  std::vector<Vec2> dirs = {{1, 0}, {0, 1}};
  VecX off(2);
  off << 1.0, 2.0;
  auto z = min_norm_feasible(dirs, off);
  REQUIRE(z.has_value());
  CHECK(z->norm() == 0.0);

  // single active halfplane: z.(1,0) <= -1 projects the origin to (-1,0)
  dirs = {{1, 0}};
  off.resize(1);
  off << -1.0;
  z = min_norm_feasible(dirs, off);
  REQUIRE(z.has_value());
  CHECK((*z - Vec2(-1, 0)).norm() < 1e-12);

  // two constraints meeting at a corner
  dirs = {{1, 0}, {0, 1}};
  off.resize(2);
  off << -1.0, -2.0;
  z = min_norm_feasible(dirs, off);
  REQUIRE(z.has_value());
  CHECK((*z - Vec2(-1, -2)).norm() < 1e-12);

  // infeasible pair
  dirs = {{1, 0}, {-1, 0}};
  off.resize(2);
  off << -1.0, -1.0;
  CHECK_FALSE(min_norm_feasible(dirs, off).has_value());
}

namespace {
double lbsc_violation(const Mesh& mesh, const VecX& phi, const std::vector<Vec2>& z) {
  // independent brute-force check of the supporting-slope inequality
  const auto& loop = mesh.boundary_loop;
  const int n = static_cast<int>(loop.size());
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lhs = phi[i] + z[i].dot(mesh.vertices[loop[j]] - mesh.vertices[loop[i]]);
      worst = std::max(worst, lhs - phi[j]);
    }
  return worst;
}
}  // namespace

TEST_CASE("lbsc recovers the slope of an affine trace") {
  Mesh mesh = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 1.0 / 64));
  const Vec2 a(0.7, -0.3);
  const auto& loop = mesh.boundary_loop;
  VecX phi(loop.size());
  for (size_t i = 0; i < loop.size(); ++i) phi[i] = a.dot(mesh.vertices[loop[i]]) + 0.25;

  auto rep = check_lbsc(mesh, phi, a.norm() + 1e-9);
  CHECK(rep.pass);
  CHECK(rep.minimal_rank == doctest::Approx(a.norm()).epsilon(1e-6));
  CHECK(lbsc_violation(mesh, phi, rep.slopes) < 1e-9);

  auto fail = check_lbsc(mesh, phi, a.norm() - 1e-3);
  CHECK_FALSE(fail.pass);
}

TEST_CASE("lbsc holds for squared distance and fails for the sqrt spike") {
  Mesh mesh = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 1.0 / 32));
  const auto& loop = mesh.boundary_loop;
  const Vec2 g0 = mesh.vertices[loop[0]];

  VecX sqdist(loop.size());
  for (size_t i = 0; i < loop.size(); ++i)
    sqdist[i] = (mesh.vertices[loop[i]] - g0).squaredNorm();
  auto ok = check_lbsc(mesh, sqdist, 4.0);
  CHECK(ok.pass);
  CHECK(ok.minimal_rank <= 4.0 + 1e-9);
  CHECK(lbsc_violation(mesh, sqdist, ok.slopes) < 1e-9);

  VecX spike(loop.size());
  for (size_t i = 0; i < loop.size(); ++i)
    spike[i] = -std::sqrt((mesh.vertices[loop[i]] - g0).norm());
  auto bad = check_lbsc(mesh, spike, 300.0);
  CHECK_FALSE(bad.pass);
  // adjacent-chord bound: minimal rank >= 2 c^(-3/2) with c the chord length
  const double c = (mesh.vertices[loop[1]] - g0).norm();
  CHECK(bad.minimal_rank >= 2.0 * std::pow(c, -1.5) * (1 - 1e-9));
}
