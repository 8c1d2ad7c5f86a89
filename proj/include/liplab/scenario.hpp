#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "liplab/barriers.hpp"
#include "liplab/certify.hpp"
#include "liplab/lagrangian.hpp"
#include "liplab/mesh.hpp"
#include "liplab/nonconvex.hpp"
#include "liplab/solver.hpp"
#include "liplab/types.hpp"

namespace liplab {

/**
 * Source of a scalar field over the mesh.  For the forcing term the field
 * lives on every vertex; for the boundary trace it lives on boundary_loop
 * entries in loop order.  CSV files hold one value per line in the same
 * order the mesh enumerates them, so a file is only portable together with
 * the domain spec that produced its mesh.
 */
struct FieldSpec {
  enum class Kind { constant, named, affine, csv };
  Kind kind = Kind::constant;
  double value = 0.0;       // constant
  std::string name;         // named
  Vec2 slope = Vec2::Zero();  // affine: slope . x + value
  std::string path;         // csv
};

enum class Pipeline { check_only, convex, nonconvex };

struct Tolerances {
  double tol_rel = 1e-12;       // solver window threshold
  double tol_lip = 0.0;         // slack on worst_ratio <= 1
  double tol_theta = 1e-9;      // Theta(q) considered zero below this
  double tol_area = 0.01;       // acceptable offending fraction after repair
  double tol_energy = 1e-8;     // allowed rise of the true energy across levels
  double tol_comparison = 1e-6; // allowed sandwich margin deficit
  double tol_gap = 1e-3;        // f - f** threshold for component detection
};

/**
 * One experiment: domain, integrand, data, regularization schedule and the
 * tolerances every certificate is judged against.  holder_p = 0 defers to
 * the integrand's growth metadata.  R and M are the constants the geometry
 * and trace checks certify, not measurements.
 */
struct Scenario {
  std::string name = "scenario";
  DomainSpec domain;
  std::string lagrangian = "quadratic";
  std::vector<double> lagrangian_params;
  FieldSpec g;
  FieldSpec phi;
  std::vector<int> schedule = {4, 16, 64, 256};
  Tolerances tol;
  double c_sobolev = 1.0;
  double R = 1.0;
  double M = 100.0;
  double holder_p = 0.0;
  double holder_c = 0.0;
  double grad_box = 4.0;      // half-width of the gradient window for smoothing bands
  double fss_box = 2.0;       // half-width of the relaxed-envelope grid for repair
  int fss_nodes = 257;
  int anchors = 8;
  int max_iters = 60000;
  int boundary_samples = 64;
  Pipeline pipeline = Pipeline::convex;
};

/**
 * Flat key = value text, one setting per line, '#' comments.  Unknown keys
 * and malformed values throw contract_error with the offending line.  Keys:
 *   name, domain (disc cx cy r | ellipse cx cy a b | polygon x0 y0 ...), h,
 *   lagrangian (catalog name, parameters appended), g, phi, schedule,
 *   pipeline (check_only | convex | nonconvex), R, M, c_sobolev, holder_p,
 *   holder_c, grad_box, anchors, max_iters, boundary_samples and every
 *   tolerance by its field name.
 */
Scenario parse_scenario(std::istream& in, const std::string& name_hint = "scenario");
Scenario load_scenario(const std::string& path);

/** Catalog lookup; throws on unknown names or wrong parameter counts. */
LagrangianPtr make_catalog(const std::string& name, const std::vector<double>& params);

/** Forcing field on every vertex. */
VecX realize_g(const FieldSpec& spec, const Mesh& mesh);
/** Boundary trace on boundary_loop entries, loop order. */
VecX realize_phi(const FieldSpec& spec, const Mesh& mesh);

/** Built-in integrands, traces and forcing fields, one per line. */
std::string list_catalog();

enum class RunStatus : int {
  ok = 0,
  hypothesis_failure = 2,
  nonconvergence = 3,
  certificate_failure = 4,
};

/**
 * Everything a run produced.  report_json is the canonical report (no
 * timestamps, byte-identical across reruns of the same build); failures
 * lists the structured entries that drove a nonzero status.  The per-step
 * certificate vectors align with solve.steps.
 */
struct RunReport {
  RunStatus status = RunStatus::ok;
  std::vector<std::string> failures;
  std::string report_json;

  Mesh mesh;
  UniformConvexityReport convexity;
  LBSCReport lbsc;
  ConvexityReport integrand;
  bool hypothesis_pass = false;

  SequenceReport solve;
  std::vector<LipschitzCertificate> lipschitz;
  std::vector<ComparisonReport> comparison;
  HolderCertificate holder;
  double u0 = 0.0;

  bool repaired = false;
  RepairReport repair;

  VecX u_final;  // repaired field when the repair stage ran
};

/** How far past the solve stage a run goes. */
enum class RunDepth {
  solve_only,  // hypothesis checks + solve; no certificates, no repair
  certify,     // everything except the repair stage
  full,
};

/**
 * check -> smooth -> solve -> certify (-> repair) with artifacts written to
 * outdir: report.json, run_meta.json (timestamps live only here), u.csv,
 * grad.csv, theta_<anchor>.csv, mesh.csv and, after a repair stage,
 * patches.jsonl.  An empty outdir resolves to $LIPLAB_OUTDIR/<name> or
 * out/<name>; outdir "-" suppresses file output entirely.
 */
RunReport run_scenario(const Scenario& scenario, const std::string& outdir = "",
                       RunDepth depth = RunDepth::full);

}  // namespace liplab
