#include "liplab/lagrangian.hpp"

#include <algorithm>
#include <cmath>

#include "liplab/conjugate.hpp"

namespace liplab {

namespace {

// golden-section minimization of a unimodal objective on [a, b]
double golden_min(const std::function<double(double)>& obj, double a, double b) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = obj(c), fd = obj(d);
  for (int it = 0; it < 120 && b - a > 1e-15 * (1 + std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = obj(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = obj(d);
    }
  }
  return 0.5 * (a + b);
}

// root of a nondecreasing g on [lo, hi] with g(lo) <= 0 <= g(hi)
double monotone_root(const std::function<double(double)>& g, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) <= 0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-16 * (1 + std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

class Quadratic final : public Lagrangian {
 public:
  Quadratic() {
    meta.r = 0.0;
    meta.eps = 1.0;  // midpoint identity: the quadratic gain is exact
    meta.p_growth = PGrowth{0.5, 2.0};
  }
  double operator()(const Vec2& xi) const override { return 0.5 * xi.squaredNorm(); }
  std::string name() const override { return "quadratic"; }
  Vec2 subgradient(const Vec2& xi) const override { return xi; }
  bool has_subgradient() const override { return true; }
  bool is_radial() const override { return true; }
  double radial_value(double t) const override { return 0.5 * t * t; }
  double radial_slope(double t) const override { return t; }
  double radial_prox(double t, double mu) const override { return t / (1 + mu); }
};

class Torsion final : public Lagrangian {
 public:
  Torsion() {
    meta.r = 1.0;
    // sharp along collinear pairs hugging |xi| = 2: margin -> 0 as eps -> 1/4
    meta.eps = 0.25;
    meta.p_growth = PGrowth{0.5, 2.0};
  }
  double operator()(const Vec2& xi) const override { return radial_value(xi.norm()); }
  std::string name() const override { return "torsion"; }
  Vec2 subgradient(const Vec2& xi) const override {
    double t = xi.norm();
    if (t > 1.0) return xi;
    return t > 1e-300 ? Vec2(xi / t) : Vec2(Vec2::Zero());
  }
  bool has_subgradient() const override { return true; }
  bool is_radial() const override { return true; }
  double radial_value(double t) const override { return t <= 1.0 ? t : 0.5 * t * t + 0.5; }
  double radial_slope(double t) const override { return t <= 1.0 ? 1.0 : t; }
  double radial_prox(double t, double mu) const override {
    if (t <= mu) return 0.0;
    if (t <= 1.0 + mu) return t - mu;
    return t / (1 + mu);
  }
};

class PNorm final : public Lagrangian {
 public:
  PNorm(double c, double p) : c_(c), p_(p) {
    if (!(c > 0) || !(p >= 1)) throw contract_error("pnorm requires c > 0 and p >= 1");
    meta.r = 0.0;
    meta.eps = p == 2.0 ? 2 * c : 0.0;
    meta.p_growth = PGrowth{c, p};
  }
  double operator()(const Vec2& xi) const override { return radial_value(xi.norm()); }
  std::string name() const override { return "pnorm"; }
  Vec2 subgradient(const Vec2& xi) const override {
    double t = xi.norm();
    if (t <= 1e-300) return Vec2::Zero();
    return Vec2(radial_slope(t) / t * xi);
  }
  bool has_subgradient() const override { return true; }
  bool is_radial() const override { return true; }
  double radial_value(double t) const override { return c_ * std::pow(t, p_); }
  double radial_slope(double t) const override {
    return p_ == 1.0 ? c_ : c_ * p_ * std::pow(t, p_ - 1);
  }
  double radial_prox(double t, double mu) const override {
    if (t <= 0) return 0.0;
    if (p_ == 1.0) return std::max(t - c_ * mu, 0.0);
    if (p_ == 2.0) return t / (1 + 2 * c_ * mu);
    // stationarity s + mu c p s^{p-1} = t has a unique root in [0, t]
    auto g = [&](double s) { return s + mu * c_ * p_ * std::pow(s, p_ - 1) - t; };
    return monotone_root(g, 0.0, t);
  }

 private:
  double c_, p_;
};

class DoubleWellRelaxed final : public Lagrangian {
 public:
  DoubleWellRelaxed() {
    // flat on the unit disc; past |xi| = r + 1 = 2 the midpoint gain is
    // limited by the chord to the far flat edge, (theta -> 0, xi on the
    // sphere of radius 2, zeta antipodal on the unit sphere) giving
    // eps = 2 f(2) / 9 = 2
    meta.r = 1.0;
    meta.eps = 2.0;
    // no p_growth claim: the profile vanishes on the whole unit disc
  }
  double operator()(const Vec2& xi) const override { return radial_value(xi.norm()); }
  std::string name() const override { return "double_well_relaxed"; }
  Vec2 subgradient(const Vec2& xi) const override {
    double t2 = xi.squaredNorm();
    return t2 <= 1.0 ? Vec2(Vec2::Zero()) : Vec2(4 * (t2 - 1) * xi);
  }
  bool has_subgradient() const override { return true; }
  bool is_radial() const override { return true; }
  double radial_value(double t) const override { return sqr(std::max(t * t - 1.0, 0.0)); }
  double radial_slope(double t) const override {
    return t <= 1.0 ? 0.0 : 4 * t * (t * t - 1);
  }
  double radial_prox(double t, double mu) const override {
    if (t <= 1.0) return t;  // the flat basin absorbs the point at zero cost
    auto g = [&](double s) { return s + 4 * mu * s * (s * s - 1) - t; };
    return monotone_root(g, 1.0, t);
  }
};

class DoubleWell final : public Lagrangian {
 public:
  double operator()(const Vec2& xi) const override { return sqr(xi.squaredNorm() - 1.0); }
  std::string name() const override { return "double_well"; }
  Vec2 subgradient(const Vec2& xi) const override {
    return 4 * (xi.squaredNorm() - 1) * xi;
  }
  bool has_subgradient() const override { return true; }
  bool is_radial() const override { return true; }
  double radial_value(double t) const override { return sqr(t * t - 1.0); }
  double radial_slope(double t) const override { return 4 * t * (t * t - 1); }
  double radial_prox(double, double) const override {
    throw contract_error("radial_prox undefined for a nonconvex profile");
  }
  std::shared_ptr<const Lagrangian> relaxation() const override {
    return std::make_shared<DoubleWellRelaxed>();
  }
};

class Tabulated final : public Lagrangian {
 public:
  Tabulated(const Box2& box, MatX values, std::string name)
      : box_(box), values_(std::move(values)), name_(std::move(name)) {
    if (values_.rows() != box_.nx || values_.cols() != box_.ny)
      throw contract_error("tabulated values do not match the box grid");
  }
  double operator()(const Vec2& xi) const override {
    double px = std::clamp(xi.x(), box_.lo.x(), box_.hi.x());
    double py = std::clamp(xi.y(), box_.lo.y(), box_.hi.y());
    int i = std::min(int((px - box_.lo.x()) / box_.dx()), box_.nx - 2);
    int j = std::min(int((py - box_.lo.y()) / box_.dy()), box_.ny - 2);
    double sx = (px - box_.x(i)) / box_.dx(), sy = (py - box_.y(j)) / box_.dy();
    return (1 - sx) * (1 - sy) * values_(i, j) + sx * (1 - sy) * values_(i + 1, j) +
           (1 - sx) * sy * values_(i, j + 1) + sx * sy * values_(i + 1, j + 1);
  }
  std::string name() const override { return name_; }

 private:
  Box2 box_;
  MatX values_;
  std::string name_;
};

}  // namespace

Vec2 Lagrangian::subgradient(const Vec2& xi) const {
  double h = 1e-6 * (1 + xi.norm());
  const Lagrangian& f = *this;
  return Vec2((f(xi + Vec2(h, 0)) - f(xi - Vec2(h, 0))) / (2 * h),
              (f(xi + Vec2(0, h)) - f(xi - Vec2(0, h))) / (2 * h));
}

double Lagrangian::radial_value(double) const {
  throw contract_error("radial_value called on a non-radial integrand");
}

double Lagrangian::radial_slope(double t) const {
  double h = 1e-6 * (1 + std::abs(t));
  return (radial_value(t + h) - radial_value(std::max(t - h, 0.0))) /
         (t + h - std::max(t - h, 0.0));
}

double Lagrangian::radial_prox(double t, double mu) const {
  if (t <= 0) return 0.0;
  auto obj = [&](double s) { return radial_value(s) + sqr(t - s) / (2 * mu); };
  return golden_min(obj, 0.0, t);
}

LagrangianPtr make_quadratic() { return std::make_shared<Quadratic>(); }
LagrangianPtr make_torsion() { return std::make_shared<Torsion>(); }
LagrangianPtr make_pnorm(double c, double p) { return std::make_shared<PNorm>(c, p); }
LagrangianPtr make_double_well() { return std::make_shared<DoubleWell>(); }
LagrangianPtr make_tabulated(const Box2& box, const MatX& values, std::string name) {
  return std::make_shared<Tabulated>(box, values, std::move(name));
}

double midpoint_convexity_margin(const std::function<double(const Vec2&)>& f, double eps,
                                 double ball_radius, const Box2& box, int n_pairs,
                                 Vec2* worst_xi, Vec2* worst_zeta, double* worst_theta,
                                 std::vector<MidpointWitness>* violations,
                                 double violation_threshold) {
  const double thetas[3] = {0.25, 0.5, 0.75};
  double worst = std::numeric_limits<double>::infinity();
  bool found = false;

  auto probe = [&](Vec2 xi, Vec2 zeta) {
    if (xi.norm() < zeta.norm()) std::swap(xi, zeta);
    if (xi.norm() <= ball_radius) return;
    found = true;
    double fxi = f(xi), fzeta = f(zeta);
    for (double th : thetas) {
      double margin = th * fxi + (1 - th) * fzeta - f(th * xi + (1 - th) * zeta) -
                      0.5 * eps * th * (1 - th) * (xi - zeta).squaredNorm();
      if (margin < worst) {
        worst = margin;
        if (worst_xi) *worst_xi = xi;
        if (worst_zeta) *worst_zeta = zeta;
        if (worst_theta) *worst_theta = th;
      }
      if (violations && margin < violation_threshold && violations->size() < 32)
        violations->push_back({xi, zeta, th, margin});
    }
  };

  Vec2 span = box.hi - box.lo;
  for (int i = 0; i < n_pairs; ++i) {
    Vec2 xi = box.lo + Vec2(halton(i, 2) * span.x(), halton(i, 3) * span.y());
    Vec2 zeta = box.lo + Vec2(halton(i, 5) * span.x(), halton(i, 7) * span.y());
    probe(xi, zeta);
  }

  // collinear pairs through the origin hug the tight cases of radial profiles
  double rmax = std::min(std::min(box.hi.x(), box.hi.y()), std::min(-box.lo.x(), -box.lo.y()));
  if (rmax > ball_radius * 1.01) {
    for (int d = 0; d < 16; ++d) {
      double phi = M_PI * d / 16.0;
      Vec2 dir(std::cos(phi), std::sin(phi));
      for (int a = 1; a <= 48; ++a) {
        double t1 = ball_radius + (rmax - ball_radius) * a / 48.0;
        for (int b = 0; b <= 48; ++b) {
          double t2 = -rmax + 2 * rmax * b / 48.0;
          probe(t1 * dir, t2 * dir);
        }
      }
    }
  }

  return found ? worst : 0.0;
}

ConvexityReport check_hypotheses(const Lagrangian& f, const Box2& box,
                                 const HypothesisOptions& opts) {
  ConvexityReport rep;
  auto fn = [&f](const Vec2& x) { return f(x); };

  double f0 = f(Vec2::Zero());
  double min_val = f0;
  bool finite = std::isfinite(f0);
  Vec2 span = box.hi - box.lo;
  for (int i = 0; i < opts.n_pairs; ++i) {
    Vec2 x = box.lo + Vec2(halton(i, 2) * span.x(), halton(i, 3) * span.y());
    double v = f(x);
    finite = finite && std::isfinite(v);
    min_val = std::min(min_val, v);
  }
  rep.finite_everywhere = finite;
  rep.zero_at_origin = std::abs(f0) <= opts.tol && min_val >= -opts.tol;

  rep.worst_margin =
      midpoint_convexity_margin(fn, f.meta.eps, f.meta.r + 1, box, opts.n_pairs, &rep.worst_xi,
                                &rep.worst_zeta, &rep.worst_theta, &rep.violations, -opts.tol);
  rep.convex_outside_ball = rep.worst_margin >= -opts.tol;

  rep.worst_margin_shifted =
      midpoint_convexity_margin(fn, f.meta.eps, f.meta.r + 2, box, opts.n_pairs);
  rep.convex_outside_shifted_ball = rep.worst_margin_shifted >= -opts.tol;

  rep.superlinear = superlinear_probe(f, opts.dual_radius);
  return rep;
}

}  // namespace liplab
