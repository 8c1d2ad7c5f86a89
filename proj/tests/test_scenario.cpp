#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "liplab/scenario.hpp"
#include "liplab/types.hpp"

using namespace liplab;
namespace fs = std::filesystem;

namespace {

Scenario from_text(const std::string& text, const std::string& name = "test") {
  std::istringstream in(text);
  return parse_scenario(in, name);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("scenario_io") / name;
  fs::remove_all(dir);
  return dir;
}

const char* kPoissonText = R"(
# analytic benchmark: -Laplace u = -1 on the unit disc
name = poisson_small
domain = disc 0 0 1
h = 0.0625
lagrangian = quadratic
g = constant 1
phi = constant 0
schedule = 16 64
R = 1
M = 4
)";

}  // namespace

TEST_CASE("parser reads every key and rejects bad input") {
  Scenario sc = from_text(R"(
name = full
domain = ellipse 0.5 -0.25 2 1
h = 0.125
lagrangian = pnorm 0.3 3
g = named negative_unit
phi = affine 0.25 -1 0.75
schedule = 4 16
pipeline = check_only
tol_rel = 1e-11
tol_lip = 0.01
tol_theta = 1e-8
tol_area = 0.05
tol_energy = 1e-7
tol_comparison = 1e-5
tol_gap = 0.002
c_sobolev = 2
R = 2.5
M = 7
holder_p = 3
holder_c = 0.3
grad_box = 5
fss_box = 3
fss_nodes = 65
anchors = 4
max_iters = 1000
boundary_samples = 32
)");
  CHECK(sc.name == "full");
  CHECK(sc.domain.kind == DomainSpec::Kind::ellipse);
  CHECK(sc.domain.center.x() == 0.5);
  CHECK(sc.domain.semi_axes.y() == 1.0);
  CHECK(sc.domain.h == 0.125);
  CHECK(sc.lagrangian == "pnorm");
  REQUIRE(sc.lagrangian_params.size() == 2);
  CHECK(sc.lagrangian_params[1] == 3.0);
  CHECK(sc.g.kind == FieldSpec::Kind::named);
  CHECK(sc.g.name == "negative_unit");
  CHECK(sc.phi.kind == FieldSpec::Kind::affine);
  CHECK(sc.phi.slope == Vec2(0.25, -1.0));
  CHECK(sc.phi.value == 0.75);
  CHECK(sc.schedule == std::vector<int>{4, 16});
  CHECK(sc.pipeline == Pipeline::check_only);
  CHECK(sc.tol.tol_rel == 1e-11);
  CHECK(sc.tol.tol_lip == 0.01);
  CHECK(sc.tol.tol_theta == 1e-8);
  CHECK(sc.tol.tol_area == 0.05);
  CHECK(sc.tol.tol_energy == 1e-7);
  CHECK(sc.tol.tol_comparison == 1e-5);
  CHECK(sc.tol.tol_gap == 0.002);
  CHECK(sc.c_sobolev == 2.0);
  CHECK(sc.R == 2.5);
  CHECK(sc.M == 7.0);
  CHECK(sc.holder_p == 3.0);
  CHECK(sc.holder_c == 0.3);
  CHECK(sc.grad_box == 5.0);
  CHECK(sc.fss_box == 3.0);
  CHECK(sc.fss_nodes == 65);
  CHECK(sc.anchors == 4);
  CHECK(sc.max_iters == 1000);
  CHECK(sc.boundary_samples == 32);

  // h given after the domain line still applies to it
  Scenario late = from_text("h = 0.25\ndomain = disc 0 0 1\n");
  CHECK(late.domain.h == 0.25);
  Scenario later = from_text("domain = disc 0 0 1\nh = 0.25\n");
  CHECK(later.domain.h == 0.25);

  CHECK_THROWS_AS(from_text("unknown_key = 1\n"), contract_error);
  CHECK_THROWS_AS(from_text("domain = disc 0 0\n"), contract_error);
  CHECK_THROWS_AS(from_text("domain = cube 0 0 1\n"), contract_error);
  CHECK_THROWS_AS(from_text("h = fast\n"), contract_error);
  CHECK_THROWS_AS(from_text("schedule = 4 0\n"), contract_error);
  CHECK_THROWS_AS(from_text("schedule = 4.5\n"), contract_error);
  CHECK_THROWS_AS(from_text("pipeline = sideways\n"), contract_error);
  CHECK_THROWS_AS(from_text("tol_area = -0.1\n"), contract_error);
  CHECK_THROWS_AS(from_text("tol_rel = 0\n"), contract_error);
  CHECK_THROWS_AS(from_text("lagrangian = mystery\n"), contract_error);
  CHECK_THROWS_AS(from_text("lagrangian = pnorm 0.5\n"), contract_error);
  CHECK_THROWS_AS(from_text("g = constant\n"), contract_error);
  CHECK_THROWS_AS(from_text("g = sombrero 1\n"), contract_error);
  CHECK_THROWS_AS(from_text("just words\n"), contract_error);
}

TEST_CASE("field realization matches the closed forms") {
  Mesh mesh = triangulate(DomainSpec::disc(Vec2(0, 0), 1.0, 0.25));

  FieldSpec c;
  c.kind = FieldSpec::Kind::constant;
  c.value = -6.0;
  VecX g = realize_g(c, mesh);
  CHECK(g.size() == mesh.n_vertices());
  CHECK(g.minCoeff() == -6.0);
  CHECK(g.maxCoeff() == -6.0);

  FieldSpec aff;
  aff.kind = FieldSpec::Kind::affine;
  aff.slope = Vec2(2.0, -1.0);
  aff.value = 0.5;
  VecX phi = realize_phi(aff, mesh);
  REQUIRE(phi.size() == static_cast<int>(mesh.boundary_loop.size()));
  for (int i = 0; i < phi.size(); ++i) {
    const Vec2& v = mesh.vertices[mesh.boundary_loop[i]];
    CHECK(phi[i] == 2.0 * v.x() - v.y() + 0.5);
  }

  FieldSpec spike;
  spike.kind = FieldSpec::Kind::named;
  spike.name = "sqrt_spike";
  VecX sp = realize_phi(spike, mesh);
  CHECK(sp[0] == 0.0);
  CHECK(sp.minCoeff() < -1.0);  // opposite boundary point is ~2 away
  for (int i = 0; i < sp.size(); ++i) CHECK(sp[i] <= 0.0);

  FieldSpec missing;
  missing.kind = FieldSpec::Kind::named;
  missing.name = "volcano";
  CHECK_THROWS_AS(realize_g(missing, mesh), contract_error);
  CHECK_THROWS_AS(realize_phi(missing, mesh), contract_error);

  // csv round trip, one value per vertex
  fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  fs::path file = dir / "g.csv";
  {
    std::ofstream out(file);
    for (int v = 0; v < mesh.n_vertices(); ++v) out << 0.5 * v << "\n";
  }
  FieldSpec csv;
  csv.kind = FieldSpec::Kind::csv;
  csv.path = file.string();
  VecX from_file = realize_g(csv, mesh);
  CHECK(from_file[2] == 1.0);
  CHECK_THROWS_AS(realize_phi(csv, mesh), contract_error);  // wrong length

  CHECK(list_catalog().find("torsion") != std::string::npos);
  CHECK(list_catalog().find("quadratic") != std::string::npos);
  CHECK(list_catalog().find("double_well") != std::string::npos);
  CHECK(list_catalog().find("sqrt_spike") != std::string::npos);
}

TEST_CASE("poisson pipeline runs end to end and is deterministic") {
  Scenario sc = from_text(kPoissonText);
  fs::path dir = fresh_dir("poisson");
  RunReport rep = run_scenario(sc, dir.string());

  CHECK(rep.status == RunStatus::ok);
  CHECK(rep.failures.empty());
  CHECK(rep.hypothesis_pass);
  REQUIRE(rep.solve.steps.size() == 2);
  CHECK(!rep.solve.truncated);
  REQUIRE(rep.lipschitz.size() == 2);
  REQUIRE(rep.comparison.size() == 2);
  for (size_t i = 0; i < rep.solve.steps.size(); ++i) {
    CHECK(rep.solve.steps[i].result.converged);
    CHECK(rep.lipschitz[i].pass);
    CHECK(rep.comparison[i].pass);
  }
  CHECK(rep.solve.worst_increase <= sc.tol.tol_energy);

  // final iterate against the analytic minimizer (coarse mesh, smoothed f)
  const VecX& u = rep.u_final;
  REQUIRE(u.size() == rep.mesh.n_vertices());
  double err = 0.0;
  for (int v = 0; v < rep.mesh.n_vertices(); ++v)
    err = std::max(err,
                   std::abs(u[v] - (rep.mesh.vertices[v].squaredNorm() - 1.0) / 4.0));
  CHECK(err < 0.02);

  CHECK(rep.holder.pass);
  CHECK(rep.holder.alpha == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  REQUIRE(rep.lipschitz.back().theta.size() == 8);
  for (const ThetaProfile& th : rep.lipschitz.back().theta)
    CHECK(th.q_star <= rep.lipschitz.back().q0);

  for (const char* name :
       {"report.json", "run_meta.json", "mesh.csv", "u.csv", "grad.csv", "theta_0.csv",
        "theta_7.csv"})
    CHECK(fs::exists(dir / name));
  CHECK(!fs::exists(dir / "patches.jsonl"));
  CHECK(slurp(dir / "report.json") == rep.report_json);
  CHECK(rep.report_json.find("\"exit_code\": 0") != std::string::npos);
  CHECK(rep.report_json.find("poisson_small") != std::string::npos);

  // byte-identical report and artifacts on a rerun
  fs::path dir2 = fresh_dir("poisson_rerun");
  RunReport rep2 = run_scenario(sc, dir2.string());
  CHECK(rep2.report_json == rep.report_json);
  CHECK(slurp(dir2 / "u.csv") == slurp(dir / "u.csv"));
  CHECK(slurp(dir2 / "grad.csv") == slurp(dir / "grad.csv"));
  CHECK(slurp(dir2 / "theta_3.csv") == slurp(dir / "theta_3.csv"));
}

TEST_CASE("check_only stops after the hypothesis stage") {
  Scenario sc = from_text(kPoissonText);
  sc.pipeline = Pipeline::check_only;
  fs::path dir = fresh_dir("checkonly");
  RunReport rep = run_scenario(sc, dir.string());

  CHECK(rep.status == RunStatus::ok);
  CHECK(rep.hypothesis_pass);
  CHECK(rep.solve.steps.empty());
  CHECK(rep.u_final.size() == 0);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(!fs::exists(dir / "u.csv"));
  CHECK(rep.report_json.find("\"steps\"") == std::string::npos);
}

TEST_CASE("spike trace fails the slope condition with exit code 2") {
  Scenario sc = from_text(kPoissonText);
  sc.phi.kind = FieldSpec::Kind::named;
  sc.phi.name = "sqrt_spike";
  sc.M = 2.0;
  RunReport rep = run_scenario(sc, "-");

  CHECK(rep.status == RunStatus::hypothesis_failure);
  CHECK(!rep.hypothesis_pass);
  CHECK(!rep.lbsc.pass);
  CHECK(rep.convexity.pass);
  REQUIRE(!rep.failures.empty());
  CHECK(rep.failures[0].find("slope condition") != std::string::npos);
  CHECK(rep.solve.steps.empty());
  CHECK(rep.report_json.find("\"exit_code\": 2") != std::string::npos);
}

TEST_CASE("iteration starvation surfaces as nonconvergence") {
  Scenario sc = from_text(kPoissonText);
  sc.max_iters = 3;
  RunReport rep = run_scenario(sc, "-");

  CHECK(rep.status == RunStatus::nonconvergence);
  CHECK(rep.solve.truncated);
  REQUIRE(!rep.failures.empty());
  CHECK(rep.failures[0].find("did not converge") != std::string::npos);
  CHECK(rep.report_json.find("\"exit_code\": 3") != std::string::npos);
}

TEST_CASE("nonconvex pipeline reports a partial repair honestly") {
  Scenario sc = from_text(R"(
name = well_small
domain = disc 0 0 1
h = 0.03125
lagrangian = double_well
g = constant 1
phi = constant 0
schedule = 8 16
pipeline = nonconvex
fss_box = 2
fss_nodes = 129
R = 1
M = 4
)");
  fs::path dir = fresh_dir("repair");
  RunReport rep = run_scenario(sc, dir.string());

  CHECK(rep.repaired);
  CHECK(rep.hypothesis_pass);  // checks run on the relaxation
  CHECK(!rep.solve.truncated);
  // the regularized slope reaches the well ring at radius ~ 4/k, so the
  // smoothed cone tip leaves an offending core of fraction ~ (4/k)^2
  CHECK(rep.repair.offending_before > 0.02);
  CHECK(rep.repair.offending_before < 0.12);
  // at this width no admissible radius clears both the curvature of the
  // core and the mesh floor, so the accepted patches are dimples that move
  // a vertex or two without flipping any triangle; the run must say so
  // instead of claiming success
  CHECK(rep.repair.offending_after <= rep.repair.offending_before);
  CHECK(rep.repair.offending_after > sc.tol.tol_area);
  CHECK(!rep.repair.success);
  CHECK(rep.status == RunStatus::certificate_failure);
  REQUIRE(!rep.failures.empty());
  CHECK(rep.failures[0].find("offending fraction") != std::string::npos);
  for (const PatchVerdict& v : rep.repair.verdicts) {
    CHECK(v.claim2_ok);
    CHECK(v.claim2_margin > 0.0);
  }
  CHECK(rep.repair.energy_after <= rep.repair.energy_before + 1e-6);
  CHECK(rep.u_final == rep.repair.u_repaired);

  CHECK(fs::exists(dir / "patches.jsonl"));
  std::string jsonl = slurp(dir / "patches.jsonl");
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') ==
        static_cast<long>(rep.repair.patches.size()));

  RunReport again = run_scenario(sc, "-");
  CHECK(again.report_json == rep.report_json);
}

TEST_CASE("deep smoothing brings the offending core under the area budget") {
  Scenario sc = from_text(R"(
name = well_deep
domain = disc 0 0 1
h = 0.03125
lagrangian = double_well
g = constant 1
phi = constant 0
schedule = 8 16 64
pipeline = nonconvex
fss_box = 2
fss_nodes = 129
tol_area = 0.02
R = 1
M = 4
)");
  fs::path dir = fresh_dir("repair_deep");
  RunReport rep = run_scenario(sc, dir.string());

  CHECK(rep.status == RunStatus::ok);
  CHECK(rep.failures.empty());
  CHECK(rep.repaired);
  CHECK(rep.repair.success);
  CHECK(rep.repair.offending_before <= sc.tol.tol_area);
  CHECK(rep.repair.offending_after == rep.repair.offending_before);
  CHECK(rep.repair.energy_after == rep.repair.energy_before);
  CHECK(fs::exists(dir / "patches.jsonl"));
  CHECK(slurp(dir / "patches.jsonl").empty());
}

TEST_CASE("environment variable supplies the output base") {
  Scenario sc = from_text(kPoissonText);
  sc.pipeline = Pipeline::check_only;
  fs::path base = fs::path("scenario_io") / "envbase";
  fs::remove_all(base);
  setenv("LIPLAB_OUTDIR", base.string().c_str(), 1);
  run_scenario(sc, "");
  unsetenv("LIPLAB_OUTDIR");
  CHECK(fs::exists(base / "poisson_small" / "report.json"));
}
