#include "liplab/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace liplab {

namespace {

double golden_min(const std::function<double(double)>& obj, double a, double b) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = obj(c), fd = obj(d);
  for (int it = 0; it < 90; ++it) {
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

class MoreauEnvelope final : public Lagrangian {
 public:
  MoreauEnvelope(LagrangianPtr base, double mu) : base_(std::move(base)), mu_(mu) {
    meta = base_->meta;
    meta.r = base_->meta.r + 1;  // modulus certified one unit further out
    meta.eps = base_->meta.eps / 4;
    meta.p_growth.reset();
    shift_ = raw(Vec2::Zero());
  }

  double operator()(const Vec2& xi) const override { return raw(xi) - shift_; }
  std::string name() const override { return base_->name() + "_moreau"; }

  Vec2 subgradient(const Vec2& xi) const override {
    // the envelope gradient is the scaled step back to the proximal point
    return (xi - prox_point(xi)) / mu_;
  }
  bool has_subgradient() const override { return true; }

  bool is_radial() const override { return base_->is_radial(); }
  double radial_value(double t) const override {
    double s = base_->radial_prox(t, mu_);
    return base_->radial_value(s) + sqr(t - s) / (2 * mu_) - shift_;
  }
  double radial_slope(double t) const override {
    return (t - base_->radial_prox(t, mu_)) / mu_;
  }

 private:
  double raw(const Vec2& xi) const {
    if (base_->is_radial()) {
      double t = xi.norm();
      double s = base_->radial_prox(t, mu_);
      return base_->radial_value(s) + sqr(t - s) / (2 * mu_);
    }
    Vec2 p = prox_point(xi);
    return (*base_)(p) + (xi - p).squaredNorm() / (2 * mu_);
  }

  Vec2 prox_point(const Vec2& xi) const {
    if (base_->is_radial()) {
      double t = xi.norm();
      if (t <= 1e-300) return Vec2::Zero();
      return base_->radial_prox(t, mu_) / t * xi;
    }
    // nested line searches; the objective is jointly strongly convex
    double reach = std::sqrt(2 * mu_ * std::max((*base_)(xi), 0.0)) + 1e-9;
    auto inner_argmin = [&](double s1) {
      auto obj = [&](double s2) {
        Vec2 s(s1, s2);
        return (*base_)(s) + (xi - s).squaredNorm() / (2 * mu_);
      };
      return golden_min(obj, xi.y() - reach, xi.y() + reach);
    };
    auto outer = [&](double s1) {
      double s2 = inner_argmin(s1);
      Vec2 s(s1, s2);
      return (*base_)(s) + (xi - s).squaredNorm() / (2 * mu_);
    };
    double s1 = golden_min(outer, xi.x() - reach, xi.x() + reach);
    return Vec2(s1, inner_argmin(s1));
  }

  LagrangianPtr base_;
  double mu_;
  double shift_ = 0.0;
};

class TikhonovTerm final : public Lagrangian {
 public:
  TikhonovTerm(LagrangianPtr base, double lambda) : base_(std::move(base)), lambda_(lambda) {
    meta = base_->meta;
    meta.eps = base_->meta.eps + 2 * lambda_;  // the quadratic's exact midpoint gain
  }

  double operator()(const Vec2& xi) const override {
    return (*base_)(xi) + lambda_ * xi.squaredNorm();
  }
  std::string name() const override { return base_->name() + "_tikhonov"; }

  Vec2 subgradient(const Vec2& xi) const override {
    return base_->subgradient(xi) + 2 * lambda_ * xi;
  }
  bool has_subgradient() const override { return base_->has_subgradient(); }

  bool is_radial() const override { return base_->is_radial(); }
  double radial_value(double t) const override {
    return base_->radial_value(t) + lambda_ * t * t;
  }
  double radial_slope(double t) const override {
    return base_->radial_slope(t) + 2 * lambda_ * t;
  }
  double radial_prox(double t, double mu) const override {
    // absorb the quadratic into the metric: same prox at rescaled (t, mu)
    double scale = 1 + 2 * lambda_ * mu;
    return base_->radial_prox(t / scale, mu / scale);
  }

 private:
  LagrangianPtr base_;
  double lambda_;
};

}  // namespace

LagrangianPtr smooth_lagrangian(const LagrangianPtr& f, int k, const Box2& box) {
  if (!f) throw contract_error("smooth_lagrangian: null integrand");
  if (k < 1) throw contract_error("smooth_lagrangian: k must be positive");
  auto fn = [&f](const Vec2& x) { return (*f)(x); };
  if (midpoint_convexity_margin(fn, 0.0, 0.0, box, 4000) < -1e-9)
    throw contract_error("integrand is not convex on the working box; smooth its relaxation");
  return std::make_shared<MoreauEnvelope>(f, 1.0 / k);
}

LagrangianPtr regularize(const LagrangianPtr& f_k, int k) {
  if (!f_k) throw contract_error("regularize: null integrand");
  if (k < 1) throw contract_error("regularize: k must be positive");
  return std::make_shared<TikhonovTerm>(f_k, 1.0 / k);
}

VecX smooth_g(const VecX& g, int k, const Mesh& mesh) {
  if (g.size() != mesh.n_vertices()) throw contract_error("smooth_g: size mismatch");
  if (k < 1) throw contract_error("smooth_g: k must be positive");
  double sigma = mesh.diam / (8 * std::sqrt(double(k)));

  // uniform bins so each vertex only scans its sigma-neighborhood
  Vec2 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Vec2& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  double width = std::max((hi - lo).maxCoeff(), 1e-12);
  double cell = std::max(sigma, width / 2048);
  int ncx = int(width / cell) + 2, ncy = ncx;
  auto cell_of = [&](const Vec2& p) {
    int cx = std::clamp(int((p.x() - lo.x()) / cell), 0, ncx - 1);
    int cy = std::clamp(int((p.y() - lo.y()) / cell), 0, ncy - 1);
    return cy * ncx + cx;
  };
  std::vector<std::vector<int>> bins(size_t(ncx) * ncy);
  for (int v = 0; v < mesh.n_vertices(); ++v) bins[cell_of(mesh.vertices[v])].push_back(v);

  int reach = std::max(1, int(std::ceil(sigma / cell)));
  VecX out(g.size());
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec2& x = mesh.vertices[v];
    int cx = std::clamp(int((x.x() - lo.x()) / cell), 0, ncx - 1);
    int cy = std::clamp(int((x.y() - lo.y()) / cell), 0, ncy - 1);
    double acc = 0, den = 0;
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dx = -reach; dx <= reach; ++dx) {
        int bx = cx + dx, by = cy + dy;
        if (bx < 0 || bx >= ncx || by < 0 || by >= ncy) continue;
        for (int w : bins[size_t(by) * ncx + bx]) {
          double d = (mesh.vertices[w] - x).norm();
          if (d >= sigma) continue;
          double wgt = 1.0 - d / sigma;
          acc += wgt * g[w];
          den += wgt;
        }
      }
    out[v] = acc / den;  // the vertex itself always contributes weight 1
  }

  double cap = g.cwiseAbs().maxCoeff() + 1.0;
  return out.cwiseMax(-cap).cwiseMin(cap);
}

SmoothingSchedule make_schedule(const std::vector<int>& ks, const LagrangianPtr& f,
                                const Box2& box, double diam) {
  SmoothingSchedule sched;
  sched.box = box;
  int prev = 0;
  for (int k : ks) {
    if (k <= prev) throw contract_error("schedule k values must be strictly increasing");
    prev = k;
    LagrangianPtr fk = smooth_lagrangian(f, k, box);
    double delta = 0.0;
    for (int i = 0; i < box.nx; ++i)
      for (int j = 0; j < box.ny; ++j) {
        Vec2 x = box.node(i, j);
        delta = std::max(delta, (*f)(x) - (*fk)(x));
      }
    sched.steps.push_back({k, 1.0 / k, diam / (8 * std::sqrt(double(k))), delta});
  }
  return sched;
}

}  // namespace liplab
