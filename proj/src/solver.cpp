#include "liplab/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace liplab {

namespace {

// per-triangle geometry flattened so the iteration loop makes no mesh calls
struct Assembly {
  std::vector<Tri> tri;
  std::vector<double> area;
  std::vector<std::array<Vec2, 3>> hat;
};

Assembly cache_geometry(const Mesh& mesh) {
  Assembly a;
  a.tri = mesh.triangles;
  a.area.resize(mesh.n_triangles());
  a.hat.resize(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    a.area[t] = mesh.tri_area(t);
    for (int i = 0; i < 3; ++i) a.hat[t][i] = mesh.hat_gradient(t, i);
  }
  return a;
}

inline Vec2 local_gradient(const Assembly& a, size_t t, const VecX& u) {
  const Tri& T = a.tri[t];
  return u[T[0]] * a.hat[t][0] + u[T[1]] * a.hat[t][1] + u[T[2]] * a.hat[t][2];
}

double cached_energy(const Assembly& a, const Lagrangian& f, const VecX& gm, const VecX& u) {
  double e = gm.dot(u);
  for (size_t t = 0; t < a.tri.size(); ++t) e += a.area[t] * f(local_gradient(a, t, u));
  return e;
}

void cached_gradient(const Assembly& a, const Lagrangian& f, const VecX& gm,
                     const std::vector<char>& interior, const VecX& u, VecX& out) {
  out = gm;
  for (size_t t = 0; t < a.tri.size(); ++t) {
    Vec2 df = a.area[t] * f.subgradient(local_gradient(a, t, u));
    const Tri& T = a.tri[t];
    for (int i = 0; i < 3; ++i) out[T[i]] += df.dot(a.hat[t][i]);
  }
  for (int v = 0; v < int(interior.size()); ++v)
    if (!interior[v]) out[v] = 0.0;
}

}  // namespace

DiscreteFunctional assemble(const Mesh& mesh, const LagrangianPtr& f, const VecX& g,
                            const VecX& phi) {
  if (!f) throw contract_error("assemble: missing integrand");
  if (g.size() != mesh.n_vertices()) throw contract_error("assemble: g must be per-vertex");
  if (phi.size() != int(mesh.boundary_loop.size()))
    throw contract_error("assemble: phi must follow boundary_loop");
  DiscreteFunctional F;
  F.mesh = &mesh;
  F.f = f;
  F.g = g;
  F.phi = phi;
  F.mass = VecX::Zero(mesh.n_vertices());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    double third = mesh.tri_area(t) / 3.0;
    for (int i = 0; i < 3; ++i) F.mass[mesh.triangles[t][i]] += third;
  }
  F.growth_unverified = !(f->meta.p_growth && f->meta.p_growth->p > 1.0);
  return F;
}

double energy_of(const DiscreteFunctional& functional, const VecX& u) {
  const Mesh& mesh = *functional.mesh;
  if (u.size() != mesh.n_vertices()) throw contract_error("energy_of: u must be per-vertex");
  const Lagrangian& f = *functional.f;
  double e = functional.mass.cwiseProduct(functional.g).dot(u);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Tri& T = mesh.triangles[t];
    Vec2 gu = u[T[0]] * mesh.hat_gradient(t, 0) + u[T[1]] * mesh.hat_gradient(t, 1) +
              u[T[2]] * mesh.hat_gradient(t, 2);
    e += mesh.tri_area(t) * f(gu);
  }
  return e;
}

std::vector<Vec2> gradient_field(const Mesh& mesh, const VecX& u) {
  if (u.size() != mesh.n_vertices())
    throw contract_error("gradient_field: u must be per-vertex");
  std::vector<Vec2> grad(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Tri& T = mesh.triangles[t];
    grad[t] = u[T[0]] * mesh.hat_gradient(t, 0) + u[T[1]] * mesh.hat_gradient(t, 1) +
              u[T[2]] * mesh.hat_gradient(t, 2);
  }
  return grad;
}

SolveResult minimize(const DiscreteFunctional& functional, const SolveOptions& opts,
                     const VecX* init) {
  const Mesh& mesh = *functional.mesh;
  const int n = mesh.n_vertices();
  const Lagrangian& f = *functional.f;
  Assembly a = cache_geometry(mesh);
  VecX gm = functional.mass.cwiseProduct(functional.g);

  std::vector<char> interior(n, 1);
  for (int v : mesh.boundary_vertices) interior[v] = 0;

  VecX x;
  if (init) {
    if (init->size() != n) throw contract_error("minimize: init must be per-vertex");
    x = *init;
  } else {
    x = VecX::Constant(n, functional.phi.size() ? functional.phi.mean() : 0.0);
  }
  for (size_t i = 0; i < mesh.boundary_loop.size(); ++i)
    x[mesh.boundary_loop[i]] = functional.phi[i];

  double ex = cached_energy(a, f, gm, x);
  if (!std::isfinite(ex)) throw contract_error("minimize: energy infinite at the initial guess");

  VecX x_prev = x, y = x, gy(n), z(n), d(n);
  double t = 1.0, curvature = 1.0;
  std::vector<double> hist;
  hist.reserve(opts.max_iters + 1);
  hist.push_back(ex);

  bool converged = false;
  double rel = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opts.max_iters && !converged) {
    ++it;
    curvature = std::max(curvature * 0.97, 1e-12);
    double ey = cached_energy(a, f, gm, y);
    cached_gradient(a, f, gm, interior, y, gy);

    double ez = 0.0;
    for (int bt = 0;; ++bt) {
      z = y - gy / curvature;
      ez = cached_energy(a, f, gm, z);
      d = z - y;
      double model = ey + gy.dot(d) + 0.5 * curvature * d.squaredNorm();
      if (ez <= model + 1e-12 * (1.0 + std::abs(model))) break;
      if (bt >= 100) throw contract_error("minimize: backtracking found no descent step");
      curvature *= 2.0;
    }

    if (ez <= ex) {
      double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      x_prev.swap(x);
      x = z;
      if (ez > ex + 1e-9 * (1.0 + std::abs(ex)))
        throw contract_error("minimize: accepted step increased the energy");
      ex = ez;
      y = x + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
    } else {
      // momentum overshot: restart the extrapolation at the incumbent
      x_prev = x;
      y = x;
      t = 1.0;
    }

    hist.push_back(ex);
    if (int(hist.size()) > opts.window) {
      double drop = hist[hist.size() - 1 - opts.window] - hist.back();
      rel = drop / std::max(1.0, std::abs(hist.back()));
      if (rel <= opts.tol_rel) converged = true;
    }
  }

  SolveResult res;
  res.u = x;
  res.grad = gradient_field(mesh, x);
  res.energy = energy_of(functional, x);
  res.iterations = it;
  res.rel_decrease_last = rel;
  res.converged = converged;
  res.sup_norm = x.cwiseAbs().maxCoeff();
  cached_gradient(a, f, gm, interior, x, gy);
  res.stationarity = gy.cwiseAbs().maxCoeff();
  return res;
}

SequenceReport minimizing_sequence(const LagrangianPtr& f, const VecX& g, const VecX& phi,
                                   const SmoothingSchedule& schedule, const Mesh& mesh,
                                   const SolveOptions& opts, double u0, const VecX* init) {
  SequenceReport rep;
  DiscreteFunctional truth = assemble(mesh, f, g, phi);

  VecX warm;
  bool have_warm = false;
  if (init) {
    warm = *init;
    have_warm = true;
  }

  for (const SmoothingStep& s : schedule.steps) {
    LagrangianPtr hk = regularize(smooth_lagrangian(f, s.k, schedule.box), s.k);
    VecX gk = smooth_g(g, s.k, mesh);
    DiscreteFunctional Fk = assemble(mesh, hk, gk, phi);

    SequenceStep step;
    step.k = s.k;
    step.result = minimize(Fk, opts, have_warm ? &warm : nullptr);
    step.energy_true = energy_of(truth, step.result.u);
    step.g_gap = (gk - g).cwiseAbs().maxCoeff();
    warm = step.result.u;
    have_warm = true;

    bool keep_going = step.result.converged;
    rep.steps.push_back(std::move(step));
    if (!keep_going) {
      rep.truncated = true;
      break;
    }
  }

  if (rep.steps.empty()) return rep;

  rep.u0 = u0;
  if (rep.u0 <= 0.0)
    for (const SequenceStep& s : rep.steps) rep.u0 = std::max(rep.u0, s.result.sup_norm);

  const SolveResult& last = rep.steps.back().result;
  double dirichlet = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t)
    dirichlet += mesh.tri_area(t) * last.grad[t].squaredNorm();

  for (size_t i = 0; i < rep.steps.size(); ++i) {
    SequenceStep& s = rep.steps[i];
    const SmoothingStep& meta = schedule.steps[i];
    s.band = meta.delta * mesh.area + 2.0 * s.g_gap * rep.u0 * mesh.area + dirichlet / s.k;
    if (i > 0)
      rep.worst_increase =
          std::max(rep.worst_increase, s.energy_true - rep.steps[i - 1].energy_true);
  }
  return rep;
}

}  // namespace liplab
