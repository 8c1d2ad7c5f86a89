#include "liplab/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "liplab/conjugate.hpp"
#include "liplab/smoothing.hpp"

namespace liplab {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& line) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size())
    throw contract_error("scenario: bad number '" + tok + "' in line '" + line + "'");
  return v;
}

int parse_int(const std::string& tok, const std::string& line) {
  double v = parse_double(tok, line);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw contract_error("scenario: expected an integer in line '" + line + "'");
  return i;
}

FieldSpec parse_field(const std::vector<std::string>& val, const std::string& line) {
  if (val.empty()) throw contract_error("scenario: empty field spec in line '" + line + "'");
  FieldSpec spec;
  const std::string& kind = val[0];
  if (kind == "constant" && val.size() == 2) {
    spec.kind = FieldSpec::Kind::constant;
    spec.value = parse_double(val[1], line);
  } else if (kind == "named" && val.size() == 2) {
    spec.kind = FieldSpec::Kind::named;
    spec.name = val[1];
  } else if (kind == "affine" && val.size() == 4) {
    spec.kind = FieldSpec::Kind::affine;
    spec.slope = Vec2(parse_double(val[1], line), parse_double(val[2], line));
    spec.value = parse_double(val[3], line);
  } else if (kind == "csv" && val.size() == 2) {
    spec.kind = FieldSpec::Kind::csv;
    spec.path = val[1];
  } else {
    throw contract_error("scenario: bad field spec in line '" + line + "'");
  }
  return spec;
}

const char* field_kind_name(FieldSpec::Kind k) {
  switch (k) {
    case FieldSpec::Kind::constant: return "constant";
    case FieldSpec::Kind::named: return "named";
    case FieldSpec::Kind::affine: return "affine";
    case FieldSpec::Kind::csv: return "csv";
  }
  return "?";
}

const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::check_only: return "check_only";
    case Pipeline::convex: return "convex";
    case Pipeline::nonconvex: return "nonconvex";
  }
  return "?";
}

VecX read_csv_column(const std::string& path, int expected) {
  std::ifstream in(path);
  if (!in) throw contract_error("scenario: cannot open csv '" + path + "'");
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    vals.push_back(parse_double(line, path));
  }
  if (static_cast<int>(vals.size()) != expected)
    throw contract_error("scenario: csv '" + path + "' holds " +
                         std::to_string(vals.size()) + " values, mesh needs " +
                         std::to_string(expected));
  VecX v(expected);
  for (int i = 0; i < expected; ++i) v[i] = vals[i];
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json field_json(const FieldSpec& s) {
  ordered_json j;
  j["kind"] = field_kind_name(s.kind);
  switch (s.kind) {
    case FieldSpec::Kind::constant: j["value"] = s.value; break;
    case FieldSpec::Kind::named: j["name"] = s.name; break;
    case FieldSpec::Kind::affine:
      j["slope"] = {s.slope.x(), s.slope.y()};
      j["offset"] = s.value;
      break;
    case FieldSpec::Kind::csv: j["path"] = s.path; break;
  }
  return j;
}

ordered_json scenario_json(const Scenario& sc) {
  ordered_json j;
  j["name"] = sc.name;
  ordered_json dom;
  switch (sc.domain.kind) {
    case DomainSpec::Kind::disc:
      dom["kind"] = "disc";
      dom["center"] = {sc.domain.center.x(), sc.domain.center.y()};
      dom["radius"] = sc.domain.radius;
      break;
    case DomainSpec::Kind::ellipse:
      dom["kind"] = "ellipse";
      dom["center"] = {sc.domain.center.x(), sc.domain.center.y()};
      dom["semi_axes"] = {sc.domain.semi_axes.x(), sc.domain.semi_axes.y()};
      break;
    case DomainSpec::Kind::polygon: {
      dom["kind"] = "polygon";
      ordered_json verts = ordered_json::array();
      for (const Vec2& v : sc.domain.vertices) verts.push_back({v.x(), v.y()});
      dom["vertices"] = verts;
      break;
    }
  }
  dom["h"] = sc.domain.h;
  j["domain"] = dom;
  j["lagrangian"] = sc.lagrangian;
  if (!sc.lagrangian_params.empty()) j["lagrangian_params"] = sc.lagrangian_params;
  j["g"] = field_json(sc.g);
  j["phi"] = field_json(sc.phi);
  j["schedule"] = sc.schedule;
  ordered_json tol;
  tol["tol_rel"] = sc.tol.tol_rel;
  tol["tol_lip"] = sc.tol.tol_lip;
  tol["tol_theta"] = sc.tol.tol_theta;
  tol["tol_area"] = sc.tol.tol_area;
  tol["tol_energy"] = sc.tol.tol_energy;
  tol["tol_comparison"] = sc.tol.tol_comparison;
  tol["tol_gap"] = sc.tol.tol_gap;
  j["tolerances"] = tol;
  j["c_sobolev"] = sc.c_sobolev;
  j["R"] = sc.R;
  j["M"] = sc.M;
  j["pipeline"] = pipeline_name(sc.pipeline);
  return j;
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& name_hint) {
  Scenario sc;
  sc.name = name_hint;
  double h = sc.domain.h;
  bool saw_h = false;

  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw contract_error("scenario: expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::vector<std::string> val = tokens_of(line.substr(eq + 1));
    if (val.empty()) throw contract_error("scenario: empty value in line '" + line + "'");

    if (key == "name") {
      sc.name = val[0];
    } else if (key == "domain") {
      if (val[0] == "disc" && val.size() == 4) {
        sc.domain = DomainSpec::disc(
            Vec2(parse_double(val[1], line), parse_double(val[2], line)),
            parse_double(val[3], line), h);
      } else if (val[0] == "ellipse" && val.size() == 5) {
        sc.domain = DomainSpec::ellipse(
            Vec2(parse_double(val[1], line), parse_double(val[2], line)),
            Vec2(parse_double(val[3], line), parse_double(val[4], line)), h);
      } else if (val[0] == "polygon" && val.size() >= 7 && val.size() % 2 == 1) {
        std::vector<Vec2> verts;
        for (size_t i = 1; i + 1 < val.size(); i += 2)
          verts.emplace_back(parse_double(val[i], line), parse_double(val[i + 1], line));
        sc.domain = DomainSpec::polygon(std::move(verts), h);
      } else {
        throw contract_error("scenario: bad domain in line '" + line + "'");
      }
    } else if (key == "h") {
      h = parse_double(val[0], line);
      saw_h = true;
      sc.domain.h = h;
    } else if (key == "lagrangian") {
      sc.lagrangian = val[0];
      sc.lagrangian_params.clear();
      for (size_t i = 1; i < val.size(); ++i)
        sc.lagrangian_params.push_back(parse_double(val[i], line));
    } else if (key == "g") {
      sc.g = parse_field(val, line);
    } else if (key == "phi") {
      sc.phi = parse_field(val, line);
    } else if (key == "schedule") {
      sc.schedule.clear();
      for (const std::string& t : val) {
        int k = parse_int(t, line);
        if (k <= 0) throw contract_error("scenario: schedule entries must be positive");
        sc.schedule.push_back(k);
      }
    } else if (key == "pipeline") {
      if (val[0] == "check_only") sc.pipeline = Pipeline::check_only;
      else if (val[0] == "convex") sc.pipeline = Pipeline::convex;
      else if (val[0] == "nonconvex") sc.pipeline = Pipeline::nonconvex;
      else throw contract_error("scenario: unknown pipeline '" + val[0] + "'");
    } else if (key == "tol_rel") {
      sc.tol.tol_rel = parse_double(val[0], line);
    } else if (key == "tol_lip") {
      sc.tol.tol_lip = parse_double(val[0], line);
    } else if (key == "tol_theta") {
      sc.tol.tol_theta = parse_double(val[0], line);
    } else if (key == "tol_area") {
      sc.tol.tol_area = parse_double(val[0], line);
    } else if (key == "tol_energy") {
      sc.tol.tol_energy = parse_double(val[0], line);
    } else if (key == "tol_comparison") {
      sc.tol.tol_comparison = parse_double(val[0], line);
    } else if (key == "tol_gap") {
      sc.tol.tol_gap = parse_double(val[0], line);
    } else if (key == "c_sobolev") {
      sc.c_sobolev = parse_double(val[0], line);
    } else if (key == "R") {
      sc.R = parse_double(val[0], line);
    } else if (key == "M") {
      sc.M = parse_double(val[0], line);
    } else if (key == "holder_p") {
      sc.holder_p = parse_double(val[0], line);
    } else if (key == "holder_c") {
      sc.holder_c = parse_double(val[0], line);
    } else if (key == "grad_box") {
      sc.grad_box = parse_double(val[0], line);
    } else if (key == "fss_box") {
      sc.fss_box = parse_double(val[0], line);
    } else if (key == "fss_nodes") {
      sc.fss_nodes = parse_int(val[0], line);
    } else if (key == "anchors") {
      sc.anchors = parse_int(val[0], line);
    } else if (key == "max_iters") {
      sc.max_iters = parse_int(val[0], line);
    } else if (key == "boundary_samples") {
      sc.boundary_samples = parse_int(val[0], line);
    } else {
      throw contract_error("scenario: unknown key '" + key + "'");
    }
  }

  if (saw_h) sc.domain.h = h;
  if (sc.schedule.empty()) throw contract_error("scenario: empty schedule");
  const Tolerances& t = sc.tol;
  for (double v : {t.tol_rel, t.tol_theta, t.tol_area, t.tol_energy, t.tol_comparison,
                   t.tol_gap})
    if (v <= 0.0) throw contract_error("scenario: tolerances must be positive");
  if (t.tol_lip < 0.0) throw contract_error("scenario: tol_lip must be nonnegative");
  make_catalog(sc.lagrangian, sc.lagrangian_params);  // fail on unknown names now
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("scenario: cannot open '" + path + "'");
  std::string stem = std::filesystem::path(path).stem().string();
  return parse_scenario(in, stem.empty() ? "scenario" : stem);
}

LagrangianPtr make_catalog(const std::string& name, const std::vector<double>& params) {
  auto need = [&](size_t n) {
    if (params.size() != n)
      throw contract_error("scenario: lagrangian '" + name + "' takes " +
                           std::to_string(n) + " parameters");
  };
  if (name == "quadratic") {
    need(0);
    return make_quadratic();
  }
  if (name == "torsion") {
    need(0);
    return make_torsion();
  }
  if (name == "pnorm") {
    need(2);
    return make_pnorm(params[0], params[1]);
  }
  if (name == "double_well") {
    need(0);
    return make_double_well();
  }
  throw contract_error("scenario: unknown lagrangian '" + name + "'");
}

VecX realize_g(const FieldSpec& spec, const Mesh& mesh) {
  const int n = mesh.n_vertices();
  switch (spec.kind) {
    case FieldSpec::Kind::constant:
      return VecX::Constant(n, spec.value);
    case FieldSpec::Kind::affine: {
      VecX g(n);
      for (int v = 0; v < n; ++v) g[v] = spec.slope.dot(mesh.vertices[v]) + spec.value;
      return g;
    }
    case FieldSpec::Kind::named:
      if (spec.name == "unit") return VecX::Constant(n, 1.0);
      if (spec.name == "negative_unit") return VecX::Constant(n, -1.0);
      if (spec.name == "zero") return VecX::Zero(n);
      throw contract_error("scenario: unknown forcing field '" + spec.name + "'");
    case FieldSpec::Kind::csv:
      return read_csv_column(spec.path, n);
  }
  throw contract_error("scenario: bad forcing spec");
}

VecX realize_phi(const FieldSpec& spec, const Mesh& mesh) {
  const int n = static_cast<int>(mesh.boundary_loop.size());
  switch (spec.kind) {
    case FieldSpec::Kind::constant:
      return VecX::Constant(n, spec.value);
    case FieldSpec::Kind::affine: {
      VecX phi(n);
      for (int i = 0; i < n; ++i)
        phi[i] = spec.slope.dot(mesh.vertices[mesh.boundary_loop[i]]) + spec.value;
      return phi;
    }
    case FieldSpec::Kind::named: {
      if (spec.name == "zero") return VecX::Zero(n);
      if (spec.name == "sqrt_spike") {
        const Vec2 gamma0 = mesh.vertices[mesh.boundary_loop[0]];
        VecX phi(n);
        for (int i = 0; i < n; ++i)
          phi[i] = -std::sqrt((mesh.vertices[mesh.boundary_loop[i]] - gamma0).norm());
        return phi;
      }
      throw contract_error("scenario: unknown trace '" + spec.name + "'");
    }
    case FieldSpec::Kind::csv:
      return read_csv_column(spec.path, n);
  }
  throw contract_error("scenario: bad trace spec");
}

std::string list_catalog() {
  return
      "lagrangians:\n"
      "  quadratic            |xi|^2 / 2\n"
      "  torsion              |xi| up to the unit sphere, |xi|^2/2 + 1/2 beyond\n"
      "  pnorm <c> <p>        c |xi|^p\n"
      "  double_well          (|xi|^2 - 1)^2, nonconvex well on the unit sphere\n"
      "traces (phi):\n"
      "  constant <c>\n"
      "  affine <ax> <ay> <b> ax x + ay y + b\n"
      "  named zero\n"
      "  named sqrt_spike     -sqrt(|gamma - gamma0|), violates every slope bound\n"
      "  csv <path>           one value per boundary vertex, loop order\n"
      "forcing fields (g):\n"
      "  constant <value>\n"
      "  named unit | negative_unit | zero\n"
      "  csv <path>           one value per vertex\n";
}

namespace {

ordered_json hypothesis_json(const RunReport& rep, const Scenario& sc) {
  ordered_json j;
  ordered_json geom;
  geom["pass"] = rep.convexity.pass;
  geom["R"] = sc.R;
  geom["worst_margin"] = rep.convexity.worst_margin;
  j["uniform_convexity"] = geom;
  ordered_json slope;
  slope["pass"] = rep.lbsc.pass;
  slope["M"] = sc.M;
  slope["minimal_rank"] = rep.lbsc.minimal_rank;
  slope["feasible"] = rep.lbsc.feasible;
  j["slope_condition"] = slope;
  ordered_json integ;
  integ["pass"] = rep.integrand.pass();
  integ["zero_at_origin"] = rep.integrand.zero_at_origin;
  integ["finite_everywhere"] = rep.integrand.finite_everywhere;
  integ["convex_outside_ball"] = rep.integrand.convex_outside_ball;
  integ["superlinear"] = rep.integrand.superlinear;
  integ["worst_margin"] = rep.integrand.worst_margin;
  j["integrand"] = integ;
  j["pass"] = rep.hypothesis_pass;
  return j;
}

ordered_json lipschitz_json(const LipschitzCertificate& c) {
  ordered_json j;
  j["r0"] = c.r0;
  j["q0"] = c.q0;
  j["Q"] = c.Q;
  j["q0_quarter"] = c.q0_quarter;
  j["Q_quarter"] = c.Q_quarter;
  j["c_sobolev"] = c.c_sobolev;
  j["sup_u"] = c.sup_u;
  j["worst_ratio"] = c.worst_ratio;
  j["worst_ratio_quarter"] = c.worst_ratio_quarter;
  j["pass"] = c.pass;
  return j;
}

ordered_json comparison_json(const ComparisonReport& c) {
  ordered_json j;
  j["min_lower"] = c.min_lower;
  j["min_upper"] = c.min_upper;
  j["sandwich_pass"] = c.sandwich_pass;
  j["ell_checked"] = c.ell_checked;
  if (c.ell_checked) {
    j["min_ell"] = c.min_ell;
    j["ell_pass"] = c.ell_pass;
  }
  j["pass"] = c.pass;
  return j;
}

ordered_json repair_json(const RepairReport& r) {
  ordered_json j;
  j["components"] = r.components.components.size();
  j["offending_before"] = r.offending_before;
  j["offending_after"] = r.offending_after;
  j["offending_per_pass"] = r.offending_per_pass;
  j["patches"] = r.patches.size();
  j["passes"] = r.passes;
  j["energy_before"] = r.energy_before;
  j["energy_after"] = r.energy_after;
  j["min_density_ratio"] = r.min_density_ratio;
  j["success"] = r.success;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

void write_artifacts(const std::filesystem::path& dir, const Scenario& sc,
                     const RunReport& rep, double elapsed) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", rep.report_json);

  {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    ordered_json meta;
    meta["written_at"] = stamp;
    meta["elapsed_seconds"] = elapsed;
    write_text(dir / "run_meta.json", meta.dump(2) + "\n");
  }

  {
    std::string csv = "type,a,b,c\n";
    for (const Vec2& v : rep.mesh.vertices)
      csv += "v," + fmt(v.x()) + "," + fmt(v.y()) + ",0\n";
    for (const Tri& t : rep.mesh.triangles)
      csv += "t," + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
             std::to_string(t[2]) + "\n";
    write_text(dir / "mesh.csv", csv);
  }

  if (rep.u_final.size() == rep.mesh.n_vertices()) {
    std::string csv = "x,y,u\n";
    for (int v = 0; v < rep.mesh.n_vertices(); ++v)
      csv += fmt(rep.mesh.vertices[v].x()) + "," + fmt(rep.mesh.vertices[v].y()) + "," +
             fmt(rep.u_final[v]) + "\n";
    write_text(dir / "u.csv", csv);

    std::vector<Vec2> grad = gradient_field(rep.mesh, rep.u_final);
    csv = "x,y,gx,gy\n";
    for (int t = 0; t < rep.mesh.n_triangles(); ++t) {
      Vec2 b = rep.mesh.tri_barycenter(t);
      csv += fmt(b.x()) + "," + fmt(b.y()) + "," + fmt(grad[t].x()) + "," +
             fmt(grad[t].y()) + "\n";
    }
    write_text(dir / "grad.csv", csv);
  }

  if (!rep.lipschitz.empty()) {
    const auto& profiles = rep.lipschitz.back().theta;
    for (size_t a = 0; a < profiles.size(); ++a) {
      std::string csv = "q,theta\n";
      for (int i = 0; i < profiles[a].q.size(); ++i)
        csv += fmt(profiles[a].q[i]) + "," + fmt(profiles[a].theta[i]) + "\n";
      write_text(dir / ("theta_" + std::to_string(a) + ".csv"), csv);
    }
  }

  if (rep.repaired) {
    std::string jsonl;
    for (size_t i = 0; i < rep.repair.patches.size(); ++i) {
      const SurgeryPatch& p = rep.repair.patches[i];
      const PatchVerdict& v = rep.repair.verdicts[i];
      ordered_json j;
      j["center"] = {p.center.x(), p.center.y()};
      j["sign"] = p.sign;
      j["rho"] = p.rho;
      j["delta"] = p.delta;
      j["delta_prime"] = p.delta_prime;
      j["delta_eff"] = p.delta_eff;
      j["e_area"] = p.e_area;
      j["density_ratio"] = p.density_ratio;
      j["changed_vertices"] = p.changed_vertices.size();
      j["claim2_margin"] = v.claim2_margin;
      jsonl += j.dump() + "\n";
    }
    write_text(dir / "patches.jsonl", jsonl);
  }

  (void)sc;
}

}  // namespace

RunReport run_scenario(const Scenario& sc, const std::string& outdir, RunDepth depth) {
  const auto t_start = std::chrono::steady_clock::now();
  RunReport rep;
  ordered_json report;
  report["scenario"] = scenario_json(sc);

  auto fail = [&](const std::string& what) { rep.failures.push_back(what); };

  try {
    rep.mesh = triangulate(sc.domain);
    const Mesh& mesh = rep.mesh;
    ordered_json mj;
    mj["vertices"] = mesh.n_vertices();
    mj["triangles"] = mesh.n_triangles();
    mj["h"] = mesh.h;
    mj["area"] = mesh.area;
    mj["diam"] = mesh.diam;
    report["mesh"] = mj;

    LagrangianPtr f = make_catalog(sc.lagrangian, sc.lagrangian_params);
    LagrangianPtr f_solve = f;
    if (sc.pipeline == Pipeline::nonconvex) {
      // Without a closed-form relaxation f stands in for its own envelope,
      // which the structure check below only lets through when f is convex
      // (the repair stage then finds no components and succeeds trivially).
      if (LagrangianPtr relaxed = f->relaxation()) f_solve = relaxed;
    }
    VecX g = realize_g(sc.g, mesh);
    VecX phi = realize_phi(sc.phi, mesh);

    rep.convexity = check_uniform_convexity(mesh, sc.R, sc.boundary_samples);
    rep.lbsc = check_lbsc(mesh, phi, sc.M);
    rep.integrand = check_hypotheses(*f_solve, Box2::symmetric(sc.grad_box, 41));
    rep.hypothesis_pass =
        rep.convexity.pass && rep.lbsc.pass && rep.integrand.pass();
    if (!rep.convexity.pass)
      fail("uniform convexity fails at R = " + fmt(sc.R) +
           " (worst margin " + fmt(rep.convexity.worst_margin) + ")");
    if (!rep.lbsc.pass)
      fail(std::string("slope condition fails at M = ") + fmt(sc.M) +
           (rep.lbsc.feasible
                ? " (minimal rank " + fmt(rep.lbsc.minimal_rank) + ")"
                : " (no feasible slope at some boundary sample)"));
    if (!rep.integrand.pass())
      fail("integrand structure check fails (worst midpoint margin " +
           fmt(rep.integrand.worst_margin) + ")");
    report["hypothesis"] = hypothesis_json(rep, sc);

    if (!rep.hypothesis_pass) {
      rep.status = RunStatus::hypothesis_failure;
    } else if (sc.pipeline != Pipeline::check_only) {
      const double g_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
      const double alpha = std::max(g_norm, 1e-3);
      BarrierField barriers = build_barriers(*f_solve, alpha, mesh, phi);
      rep.u0 = std::max(
          (barriers.omega_plus.array() + barriers.c1).abs().maxCoeff(),
          (barriers.omega_minus.array() + barriers.c2).abs().maxCoeff());
      LowerBarrier lower = build_lower_barrier(rep.lbsc, phi, mesh);

      SmoothingSchedule sched = make_schedule(
          sc.schedule, f_solve, Box2::symmetric(sc.grad_box, 65), mesh.diam);
      SolveOptions opts;
      opts.max_iters = sc.max_iters;
      opts.tol_rel = sc.tol.tol_rel;
      rep.solve = minimizing_sequence(f_solve, g, phi, sched, mesh, opts, rep.u0);

      if (depth != RunDepth::solve_only) {
        LipschitzParams lp;
        lp.r = f_solve->meta.r;
        lp.eps = f_solve->meta.eps;
        lp.g_norm = g_norm;
        lp.c_sobolev = sc.c_sobolev;
        lp.tol_lip = sc.tol.tol_lip;
        for (const SequenceStep& step : rep.solve.steps) {
          rep.lipschitz.push_back(lipschitz_certificate(step.result, mesh, lp));
          rep.comparison.push_back(verify_comparison(step.result.u, barriers, lower,
                                                     g, sc.tol.tol_comparison));
        }
      }

      if (rep.solve.truncated) {
        const SequenceStep& bad = rep.solve.steps.back();
        fail("solver did not converge at k = " + std::to_string(bad.k) + " after " +
             std::to_string(bad.result.iterations) + " iterations");
        rep.status = RunStatus::nonconvergence;
      } else {
        const SolveResult& last = rep.solve.steps.back().result;
        rep.u_final = last.u;

        if (depth != RunDepth::solve_only) {
          attach_theta(rep.lipschitz.back(), last, mesh, sc.anchors);

          double hp = sc.holder_p;
          double hc = sc.holder_c;
          if (hp <= 0.0 && f_solve->meta.p_growth) {
            hp = f_solve->meta.p_growth->p;
            hc = f_solve->meta.p_growth->c;
          }
          if (hp > 1.5) rep.holder = holder_certificate(last, mesh, f_solve, hp, hc);

          for (size_t i = 0; i < rep.solve.steps.size(); ++i) {
            const int k = rep.solve.steps[i].k;
            if (!rep.lipschitz[i].pass)
              fail("gradient bound fails at k = " + std::to_string(k) +
                   " (worst ratio " + fmt(rep.lipschitz[i].worst_ratio) + ")");
            if (!rep.comparison[i].pass)
              fail("comparison sandwich fails at k = " + std::to_string(k) +
                   " (lower " + fmt(rep.comparison[i].min_lower) + ", upper " +
                   fmt(rep.comparison[i].min_upper) + ")");
          }
          for (const ThetaProfile& th : rep.lipschitz.back().theta)
            if (th.q_star > rep.lipschitz.back().q0)
              fail("excess profile survives past q0 at anchor (" + fmt(th.anchor.x()) +
                   ", " + fmt(th.anchor.y()) + "): q* = " + fmt(th.q_star));
          if (rep.solve.worst_increase > sc.tol.tol_energy)
            fail("energy rose by " + fmt(rep.solve.worst_increase) +
                 " across the schedule");
          if (hp > 1.5 && !rep.holder.pass)
            fail("boundary growth certificate fails (p = " + fmt(hp) + ")");
        }

        if (depth == RunDepth::full && sc.pipeline == Pipeline::nonconvex) {
          ConjugateGrid fss =
              sampled_grid(*f_solve, Box2::symmetric(sc.fss_box, sc.fss_nodes));
          RepairOptions ro;
          ro.tol_gap = sc.tol.tol_gap;
          ro.tol_area = sc.tol.tol_area;
          rep.repair = vitali_repair(last, f, fss, g, mesh, ro);
          rep.repaired = true;
          rep.u_final = rep.repair.u_repaired;
          if (!rep.repair.success)
            fail("repair left offending fraction " + fmt(rep.repair.offending_after) +
                 " above " + fmt(sc.tol.tol_area));
        }

        if (rep.status == RunStatus::ok && !rep.failures.empty())
          rep.status = RunStatus::certificate_failure;
      }
    }
  } catch (const contract_error& e) {
    fail(e.what());
    rep.status = RunStatus::hypothesis_failure;
  }

  if (!rep.solve.steps.empty()) {
    ordered_json steps = ordered_json::array();
    for (size_t i = 0; i < rep.solve.steps.size(); ++i) {
      const SequenceStep& s = rep.solve.steps[i];
      ordered_json j;
      j["k"] = s.k;
      j["iterations"] = s.result.iterations;
      j["converged"] = s.result.converged;
      j["energy"] = s.result.energy;
      j["energy_true"] = s.energy_true;
      j["sup_norm"] = s.result.sup_norm;
      j["band"] = s.band;
      if (i < rep.lipschitz.size()) j["lipschitz"] = lipschitz_json(rep.lipschitz[i]);
      if (i < rep.comparison.size()) j["comparison"] = comparison_json(rep.comparison[i]);
      steps.push_back(j);
    }
    report["steps"] = steps;

    ordered_json certs;
    if (!rep.lipschitz.empty()) {
      certs["lipschitz"] = lipschitz_json(rep.lipschitz.back());
      ordered_json theta;
      theta["anchors"] = rep.lipschitz.back().theta.size();
      double worst_q_star = 0.0;
      for (const ThetaProfile& th : rep.lipschitz.back().theta)
        worst_q_star = std::max(worst_q_star, th.q_star);
      theta["worst_q_star"] = worst_q_star;
      theta["q0"] = rep.lipschitz.back().q0;
      certs["theta"] = theta;
    }
    if (rep.holder.pairs > 0) {
      ordered_json h;
      h["p"] = rep.holder.p;
      h["alpha"] = rep.holder.alpha;
      h["c_growth"] = rep.holder.c_growth;
      h["constant"] = rep.holder.constant;
      h["pairs"] = rep.holder.pairs;
      h["growth_ok"] = rep.holder.growth_ok;
      h["pass"] = rep.holder.pass;
      certs["holder"] = h;
    }
    ordered_json en;
    en["u0"] = rep.u0;
    en["worst_increase"] = rep.solve.worst_increase;
    certs["energy"] = en;
    report["certificates"] = certs;
  }
  if (rep.repaired) report["repair"] = repair_json(rep.repair);
  report["failures"] = rep.failures;
  report["exit_code"] = static_cast<int>(rep.status);
  rep.report_json = report.dump(2) + "\n";

  if (outdir != "-") {
    std::filesystem::path dir = outdir;
    if (outdir.empty()) {
      const char* base = std::getenv("LIPLAB_OUTDIR");
      dir = std::filesystem::path(base ? base : "out") / sc.name;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    write_artifacts(dir, sc, rep, elapsed);
  }
  return rep;
}

}  // namespace liplab
