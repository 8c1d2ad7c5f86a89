#include "doctest.h"

#include <cmath>
#include <vector>

#include "liplab/conjugate.hpp"
#include "liplab/lagrangian.hpp"

using namespace liplab;

namespace {

// closed forms used as oracles throughout this file
double torsion_value(const Vec2& xi) {
  double t = xi.norm();
  return t <= 1.0 ? t : 0.5 * t * t + 0.5;
}

double torsion_conjugate(const Vec2& z) {
  double s = std::max(z.norm(), 1.0);
  return 0.5 * (s * s - 1.0);
}

double double_well_hull(double t) {
  double s = std::max(t * t - 1.0, 0.0);
  return s * s;
}

// reference double loop the fast transform must reproduce to roundoff
double brute_conjugate(const MatX& data, const Box2& primal, const Vec2& z) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < primal.nx; ++i)
    for (int j = 0; j < primal.ny; ++j) {
      double v = z.x() * primal.x(i) + z.y() * primal.y(j) - data(i, j);
      best = std::max(best, v);
    }
  return best;
}

MatX sample(const Lagrangian& f, const Box2& box) {
  MatX out(box.nx, box.ny);
  for (int i = 0; i < box.nx; ++i)
    for (int j = 0; j < box.ny; ++j) out(i, j) = f(box.node(i, j));
  return out;
}

// lower convex envelope of samples (t_i, y_i), evaluated back at every t_i
std::vector<double> lower_envelope(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<int> hull;
  for (int i = 0; i < (int)t.size(); ++i) {
    while (hull.size() >= 2) {
      int a = hull[hull.size() - 2], b = hull[hull.size() - 1];
      double cross = (t[b] - t[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (t[i] - t[a]);
      if (cross <= 0) hull.pop_back();
      else break;
    }
    hull.push_back(i);
  }
  std::vector<double> env(t.size());
  size_t seg = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    while (seg + 1 < hull.size() && t[hull[seg + 1]] <= t[i]) ++seg;
    if (seg + 1 == hull.size()) { env[i] = y[hull[seg]]; continue; }
    int a = hull[seg], b = hull[seg + 1];
    double w = (t[i] - t[a]) / (t[b] - t[a]);
    env[i] = (1 - w) * y[a] + w * y[b];
  }
  return env;
}

}  // namespace

TEST_CASE("catalog values and subgradients") {
  auto quad = make_quadratic();
  CHECK((*quad)(Vec2(0, 0)) == 0.0);
  CHECK((*quad)(Vec2(3, 4)) == doctest::Approx(12.5));
  CHECK((quad->subgradient(Vec2(3, 4)) - Vec2(3, 4)).norm() < 1e-14);
  CHECK(quad->is_radial());

  auto tor = make_torsion();
  CHECK((*tor)(Vec2(0, 0)) == 0.0);
  CHECK((*tor)(Vec2(0.6, 0)) == doctest::Approx(0.6));
  CHECK((*tor)(Vec2(2, 0)) == doctest::Approx(2.5));
  // the two branches meet continuously on the unit sphere
  CHECK((*tor)(Vec2(1, 0)) == doctest::Approx(1.0));
  CHECK(tor->subgradient(Vec2(0.5, 0)).norm() == doctest::Approx(1.0));
  CHECK((tor->subgradient(Vec2(2, 0)) - Vec2(2, 0)).norm() < 1e-14);
  CHECK(tor->meta.r == doctest::Approx(1.0));
  CHECK(tor->meta.eps == doctest::Approx(0.25));

  auto p3 = make_pnorm(1.0, 3.0);
  CHECK((*p3)(Vec2(2, 0)) == doctest::Approx(8.0));
  CHECK((p3->subgradient(Vec2(2, 0)) - Vec2(12, 0)).norm() < 1e-12);

  auto dw = make_double_well();
  CHECK((*dw)(Vec2(0, 0)) == doctest::Approx(1.0));
  CHECK((*dw)(Vec2(1, 0)) == doctest::Approx(0.0));
  CHECK((*dw)(Vec2(0, -1)) == doctest::Approx(0.0));
  CHECK((*dw)(Vec2(2, 0)) == doctest::Approx(9.0));
}

TEST_CASE("radial prox closed forms match the definition") {
  auto quad = make_quadratic();
  CHECK(quad->radial_prox(2.0, 0.5) == doctest::Approx(2.0 / 1.5));

  auto tor = make_torsion();
  // three branches of the soft threshold, plus continuity at the seams
  CHECK(tor->radial_prox(0.3, 0.5) == doctest::Approx(0.0));
  CHECK(tor->radial_prox(1.2, 0.5) == doctest::Approx(0.7));
  CHECK(tor->radial_prox(3.0, 0.5) == doctest::Approx(2.0));
  CHECK(tor->radial_prox(0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(tor->radial_prox(1.5, 0.5) == doctest::Approx(1.0).epsilon(1e-9));

  auto soft = make_pnorm(1.0, 1.0);
  CHECK(soft->radial_prox(2.0, 0.5) == doctest::Approx(1.5));
  CHECK(soft->radial_prox(0.3, 0.5) == doctest::Approx(0.0));

  // prox values must minimize s -> psi(s) + (t-s)^2/(2 mu) against a scan
  for (auto f : {make_quadratic(), make_torsion(), make_pnorm(0.7, 3.0), make_pnorm(2.0, 1.5)}) {
    for (double t : {0.1, 0.9, 1.7, 4.0}) {
      for (double mu : {0.02, 0.3, 1.0}) {
        double s = f->radial_prox(t, mu);
        double obj = f->radial_value(s) + sqr(t - s) / (2 * mu);
        double scan_best = obj;
        for (int i = 0; i <= 4000; ++i) {
          double c = t * i / 4000.0;
          scan_best = std::min(scan_best, f->radial_value(c) + sqr(t - c) / (2 * mu));
        }
        CHECK(obj <= scan_best + 1e-9);
      }
    }
  }
}

TEST_CASE("double well relaxation is the radial lower envelope") {
  auto dw = make_double_well();
  auto relaxed = dw->relaxation();
  REQUIRE(relaxed != nullptr);

  // 1-D oracle: lower convex envelope of t -> (t^2-1)^2 vanishes on [-1,1]
  int n = 1201;
  std::vector<double> ts(n), ys(n);
  for (int i = 0; i < n; ++i) {
    ts[i] = -3.0 + 6.0 * i / (n - 1);
    ys[i] = sqr(ts[i] * ts[i] - 1.0);
  }
  auto env = lower_envelope(ts, ys);
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(env[i] - double_well_hull(ts[i])) <= 5e-3);
    CHECK(env[i] <= ys[i] + 1e-12);
  }

  // the closed-form relaxation agrees with the hull profile
  for (double t : {0.0, 0.5, 0.99, 1.0, 1.3, 2.5}) {
    CHECK(std::abs((*relaxed)(Vec2(t, 0)) - double_well_hull(t)) <= 1e-12);
    CHECK(std::abs((*relaxed)(Vec2(0, t)) - double_well_hull(t)) <= 1e-12);
  }
  CHECK((*relaxed)(Vec2(0, 0)) == 0.0);
}

TEST_CASE("hypothesis checks on the catalog") {
  Box2 box = Box2::symmetric(4.0, 9);
  HypothesisOptions opts;

  auto quad = make_quadratic();
  auto rq = check_hypotheses(*quad, box, opts);
  CHECK(rq.zero_at_origin);
  CHECK(rq.finite_everywhere);
  CHECK(rq.convex_outside_ball);
  CHECK(rq.convex_outside_shifted_ball);
  CHECK(rq.superlinear);
  CHECK(rq.pass());
  // the quadratic midpoint identity is exact, so the margin sits at zero
  CHECK(std::abs(rq.worst_margin) < 1e-10);

  auto tor = make_torsion();
  auto rt = check_hypotheses(*tor, box, opts);
  CHECK(rt.pass());
  CHECK(rt.convex_outside_shifted_ball);
  CHECK(rt.worst_margin >= -1e-9);

  // modulus 1 overclaims: collinear pair with one endpoint outside the ball
  Vec2 xi(3, 0), zeta(0.5, 0);
  double lhs = 0.5 * torsion_value(xi) + 0.5 * torsion_value(zeta);
  double gain = 0.5 * 0.25 * (xi - zeta).squaredNorm();  // eps = 1
  CHECK(lhs - torsion_value(0.5 * (xi + zeta)) - gain == doctest::Approx(-0.0625));
  double bad = midpoint_convexity_margin([](const Vec2& v) { return torsion_value(v); }, 1.0,
                                         2.0, box, opts.n_pairs);
  CHECK(bad < -1e-3);

  // pure norm: no convexity gain along rays, conjugate domain is a ball
  struct UnitNorm : Lagrangian {
    UnitNorm() { meta.eps = 0.1; }
    double operator()(const Vec2& xi) const override { return xi.norm(); }
    std::string name() const override { return "norm"; }
  } unit_norm;
  auto rn = check_hypotheses(unit_norm, box, opts);
  CHECK(!rn.convex_outside_ball);
  CHECK(!rn.superlinear);
  CHECK(!rn.pass());
  CHECK(!rn.violations.empty());

  auto dw = make_double_well();
  auto rd = check_hypotheses(*dw, box, opts);
  CHECK(!rd.zero_at_origin);
  CHECK(!rd.convex_outside_ball);
  CHECK(rd.superlinear);
  CHECK(!rd.pass());

  auto rr = check_hypotheses(*dw->relaxation(), box, opts);
  CHECK(rr.zero_at_origin);
  CHECK(rr.convex_outside_ball);
  CHECK(rr.superlinear);
  CHECK(rr.pass());
}

TEST_CASE("1-D transform equals the brute-force maximum") {
  int n = 257;
  VecX nodes(n), convex_data(n), wavy_data(n);
  for (int i = 0; i < n; ++i) {
    double x = -4.0 + 8.0 * i / (n - 1);
    nodes[i] = x;
    convex_data[i] = 0.5 * x * x;
    wavy_data[i] = std::sin(3 * x) + 0.1 * x * x;  // nonconvex input is legal
  }
  int m = 83;
  VecX slopes(m);
  for (int l = 0; l < m; ++l) slopes[l] = -3.0 + 6.0 * l / (m - 1);

  for (const VecX& data : {convex_data, wavy_data}) {
    VecX out;
    std::vector<int> arg;
    legendre_1d(nodes, data, slopes, out, arg);
    REQUIRE(out.size() == m);
    for (int l = 0; l < m; ++l) {
      double best = -1e300;
      for (int j = 0; j < n; ++j) best = std::max(best, slopes[l] * nodes[j] - data[j]);
      CHECK(out[l] == doctest::Approx(best).epsilon(1e-13));
      CHECK(slopes[l] * nodes[arg[l]] - data[arg[l]] == doctest::Approx(best).epsilon(1e-13));
    }
  }
}

TEST_CASE("fast conjugate equals brute force to roundoff") {
  Box2 primal = Box2::symmetric(4.0, 101);
  Box2 dual = Box2::symmetric(3.0, 41);
  auto tor = make_torsion();
  MatX data = sample(*tor, primal);
  ConjugateGrid grid = conjugate(*tor, primal, dual);
  for (int i = 0; i < dual.nx; ++i)
    for (int j = 0; j < dual.ny; ++j) {
      double b = brute_conjugate(data, primal, dual.node(i, j));
      CHECK(std::abs(grid.values(i, j) - b) <= 1e-12 * (1 + std::abs(b)));
    }
}

TEST_CASE("quadratic conjugate is quadratic") {
  Box2 primal = Box2::symmetric(4.0, 161);
  Box2 dual = Box2::symmetric(1.5, 31);
  ConjugateGrid grid = conjugate(*make_quadratic(), primal, dual);
  for (int i = 0; i < dual.nx; ++i)
    for (int j = 0; j < dual.ny; ++j) {
      Vec2 z = dual.node(i, j);
      CHECK(grid.finite_mask(i, j) == 1);
      // argmax snaps to the nearest primal node, so the error is O(dx^2)
      CHECK(std::abs(grid.values(i, j) - 0.5 * z.squaredNorm()) < 1e-3);
    }
  CHECK(std::abs(grid.eval(Vec2(0.7, -0.4)) - 0.5 * 0.65) < 3e-3);
  CHECK_THROWS_AS(grid.eval(Vec2(2, 0)), contract_error);
}

TEST_CASE("torsion conjugate matches the closed form") {
  Box2 primal = Box2::symmetric(7.0, 561);
  Box2 dual = Box2::symmetric(4.0, 101);
  ConjugateGrid grid = conjugate(*make_torsion(), primal, dual);
  double max_slope = 4.0 * std::sqrt(2.0);
  double tol = 2.0 * dual.dx() * max_slope;
  for (int i = 0; i < dual.nx; ++i)
    for (int j = 0; j < dual.ny; ++j) {
      Vec2 z = dual.node(i, j);
      CHECK(grid.finite_mask(i, j) == 1);
      CHECK(std::abs(grid.values(i, j) - torsion_conjugate(z)) <= tol);
    }
  // frozen spot values at |z| = 0.5, 1, 2
  CHECK(torsion_conjugate(Vec2(0.5, 0)) == 0.0);
  CHECK(torsion_conjugate(Vec2(1, 0)) == 0.0);
  CHECK(torsion_conjugate(Vec2(2, 0)) == doctest::Approx(1.5));
  CHECK(std::abs(grid.eval(Vec2(0.5, 0))) <= tol);
  CHECK(std::abs(grid.eval(Vec2(2, 0)) - 1.5) <= tol);
  CHECK(grid.values((dual.nx - 1) / 2, (dual.ny - 1) / 2) == 0.0);  // f*(0) = -min f
}

TEST_CASE("conjugate grid is convex along grid lines") {
  Box2 primal = Box2::symmetric(5.0, 161);
  Box2 dual = Box2::symmetric(3.0, 61);
  ConjugateGrid grid = conjugate(*make_torsion(), primal, dual);
  for (int i = 0; i < dual.nx; ++i)
    for (int j = 1; j + 1 < dual.ny; ++j) {
      CHECK(grid.values(i, j - 1) + grid.values(i, j + 1) - 2 * grid.values(i, j) >= -1e-11);
      CHECK(grid.values(j - 1, i) + grid.values(j + 1, i) - 2 * grid.values(j, i) >= -1e-11);
    }
}

TEST_CASE("Young inequality and conjugate monotonicity") {
  Box2 primal = Box2::symmetric(4.0, 81);
  Box2 dual = Box2::symmetric(2.0, 41);
  auto tor = make_torsion();
  ConjugateGrid ft = conjugate(*tor, primal, dual);
  for (int i = 0; i < primal.nx; i += 5)
    for (int j = 0; j < primal.ny; j += 5) {
      Vec2 x = primal.node(i, j);
      for (int a = 0; a < dual.nx; a += 7)
        for (int b = 0; b < dual.ny; b += 7) {
          Vec2 z = dual.node(a, b);
          CHECK(x.dot(z) <= (*tor)(x) + ft.values(a, b) + 1e-12);
        }
    }

  // pointwise f <= g forces conjugate(f) >= conjugate(g)
  struct Shifted : Lagrangian {
    double operator()(const Vec2& xi) const override { return 0.5 * xi.squaredNorm() + 0.5; }
    std::string name() const override { return "shifted"; }
  } shifted;
  ConjugateGrid fs = conjugate(shifted, primal, dual);
  for (int a = 0; a < dual.nx; ++a)
    for (int b = 0; b < dual.ny; ++b) CHECK(ft.values(a, b) >= fs.values(a, b) - 1e-12);

  // adding a nonnegative quadratic can only lower the conjugate
  struct Tikhonov : Lagrangian {
    double operator()(const Vec2& xi) const override {
      double t = xi.norm();
      return (t <= 1 ? t : 0.5 * t * t + 0.5) + 0.1 * xi.squaredNorm();
    }
    std::string name() const override { return "tikhonov"; }
  } tik;
  ConjugateGrid fk = conjugate(tik, primal, dual);
  for (int a = 0; a < dual.nx; ++a)
    for (int b = 0; b < dual.ny; ++b) CHECK(fk.values(a, b) <= ft.values(a, b) + 1e-12);
}

TEST_CASE("finite mask flags boundary-attained suprema") {
  Box2 primal = Box2::symmetric(4.0, 129);
  Box2 dual = Box2::symmetric(2.0, 65);
  ConjugateGrid grid = conjugate(*make_pnorm(1.0, 1.0), primal, dual);
  for (int i = 0; i < dual.nx; ++i)
    for (int j = 0; j < dual.ny; ++j) {
      double r = dual.node(i, j).norm();
      if (r < 1.0 - 2 * dual.dx()) {
        CHECK(grid.finite_mask(i, j) == 1);
        CHECK(std::abs(grid.values(i, j)) <= 1e-12);
      }
      if (r > 1.0 + 2 * dual.dx()) CHECK(grid.finite_mask(i, j) == 0);
    }
  CHECK(grid.coverage_fraction() < 1.0);
  CHECK(!grid.covered(Vec2(1.8, 0)));
  CHECK(grid.covered(Vec2(0.2, 0.1)));
}

TEST_CASE("superlinearity probe separates growth classes") {
  CHECK(superlinear_probe(*make_quadratic(), 3.0));
  CHECK(superlinear_probe(*make_torsion(), 3.0));
  CHECK(superlinear_probe(*make_double_well(), 3.0));
  CHECK(!superlinear_probe(*make_pnorm(1.0, 1.0), 3.0));
}

TEST_CASE("biconjugate fixes convex functions") {
  Box2 primal = Box2::symmetric(3.0, 121);
  Box2 dual = Box2::symmetric(4.0, 161);
  for (auto f : {make_quadratic(), make_torsion()}) {
    ConjugateGrid bi = biconjugate(*f, primal, dual);
    double lip = 3.0 * std::sqrt(2.0) + 1.0;
    double tol = 2.0 * (primal.dx() + dual.dx()) * lip;
    for (int i = 0; i < primal.nx; ++i)
      for (int j = 0; j < primal.ny; ++j) {
        double fv = (*f)(primal.node(i, j));
        CHECK(bi.values(i, j) <= fv + 1e-12 * (1 + std::abs(fv)));
        if (bi.finite_mask(i, j)) CHECK(std::abs(bi.values(i, j) - fv) <= tol);
      }
  }
}

TEST_CASE("double well biconjugate recovers the radial hull") {
  auto dw = make_double_well();
  Box2 primal = Box2::symmetric(2.5, 201);
  Box2 dual = Box2::symmetric(60.0, 481);
  ConjugateGrid bi = biconjugate(*dw, primal, dual);
  int violations = 0;
  for (int i = 0; i < primal.nx; ++i)
    for (int j = 0; j < primal.ny; ++j) {
      Vec2 x = primal.node(i, j);
      double fv = (*dw)(x);
      if (bi.values(i, j) > fv + 1e-12 * (1 + std::abs(fv))) ++violations;
      if (x.norm() <= 0.9) CHECK(std::abs(bi.values(i, j)) <= 0.06);
      if (x.norm() >= 1.1 && x.norm() <= 2.0)
        CHECK(std::abs(bi.values(i, j) - fv) <= 0.02);
    }
  CHECK(violations == 0);
}
