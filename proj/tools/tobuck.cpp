// tobuck: run, analyse, verify and benchmark buckling-constrained
// thermo-elastic topology optimisation problems.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "tobuck/config.hpp"
#include "tobuck/diagnostics.hpp"
#include "tobuck/export.hpp"
#include "tobuck/optimizer.hpp"
#include "tobuck/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace tobuck;

namespace {

struct Globals {
  std::string output_dir;
  long long seed = -1;
  int threads = 0;
  bool quiet = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<fs::path> fixture_dirs() {
  std::vector<fs::path> dirs{"fixtures"};
  if (const char* env = std::getenv("TOBUCK_FIXTURE_DIR")) dirs.emplace_back(env);
#ifdef TOBUCK_FIXTURE_DIR
  dirs.emplace_back(TOBUCK_FIXTURE_DIR);
#endif
  return dirs;
}

ProblemSpec load_spec(const std::string& name, const Globals& g) {
  ProblemSpec spec = parse_problem_config(resolve_config_path(name, fixture_dirs()));
  if (g.seed >= 0) spec.solver.seed = static_cast<std::uint64_t>(g.seed);
  if (!g.output_dir.empty()) spec.output.directory = g.output_dir;
  else if (const char* env = std::getenv("TOBUCK_OUTPUT_DIR"); env && *env) spec.output.directory = env;
  return spec;
}

fs::path prepare_output(const ProblemSpec& spec) {
  fs::path dir(spec.output.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

bool wants(const ProblemSpec& spec, std::string_view format) {
  return std::find(spec.output.formats.begin(), spec.output.formats.end(), format) != spec.output.formats.end();
}

double applied_force(const AnalysisModel& model) { return model.structural_load().sum(); }

std::string fmt(double v, int prec = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// --- run -------------------------------------------------------------------

int cmd_run(const std::string& config, const Globals& g) {
  const ProblemSpec spec = load_spec(config, g);
  const OptimizationProblem problem = build_problem(spec);
  const fs::path dir = prepare_output(spec);
  const auto& mesh = problem.model.mesh();

  auto observer = [&](const HistoryRow& row, const DesignField& design, const DesignAnalysis& analysis) {
    if (!g.quiet)
      std::cout << "iter " << row.iter << "  v=" << fmt(row.v, 4) << "  J/J0=" << fmt(row.J_over_J0, 4)
                << "  P/P0=" << fmt(row.P_over_P0, 4) << "  lambda=" << fmt(row.lambda) << "  inner=" << row.inner_steps
                << "  t=" << fmt(row.wall_s, 4) << "s" << std::endl;
    if (spec.output.export_every > 0 && row.iter % spec.output.export_every == 0 && wants(spec, "vtk")) {
      char name[32];
      std::snprintf(name, sizeof name, "topology_%04d.vtk", row.iter);
      export_vtk(mesh, design, analysis_fields(mesh, design, analysis), dir / name);
    }
  };
  const OptimizationResult result = run_optimization(problem, observer);
  if (wants(spec, "csv")) export_history(result.history, dir / "history.csv");
  if (wants(spec, "vtk"))
    export_vtk(mesh, result.design, analysis_fields(mesh, result.design, result.analysis), dir / "final.vtk");

  const HistoryRow& last = result.history.back();
  std::cout << "termination=" << to_string(result.termination) << " v=" << fmt(last.v, 6)
            << " J_over_J0=" << fmt(last.J_over_J0, 6) << " P_over_P0=" << fmt(last.P_over_P0, 6)
            << " iterations=" << result.history.size() - 1 << " rejected=" << result.rejected_steps
            << " output=" << dir.string() << "\n";
  return 0;
}

// --- analyze ---------------------------------------------------------------

int cmd_analyze(const std::string& config, const Globals& g) {
  const ProblemSpec spec = load_spec(config, g);
  const OptimizationProblem problem = build_problem(spec);
  const auto& model = problem.model;
  const auto t0 = std::chrono::steady_clock::now();
  const DesignField design = full_design(model.mesh().element_count(), model.non_design_mask());
  const DesignAnalysis a = analyze_design(model, design, problem.settings, false);
  const double force = applied_force(model);

  std::cout << "elements " << model.mesh().element_count() << "\n";
  std::cout << "dofs " << model.mesh().dof_count() << "\n";
  std::cout << "delta_t " << fmt(model.delta_t()) << "\n";
  std::cout << "compliance " << fmt(a.state.compliance, 10) << "\n";
  if (a.buckling.found()) {
    std::cout << "lambda " << fmt(a.buckling.lambda, 10) << "\n";
    std::cout << "critical_load " << fmt(a.buckling.lambda * std::abs(force), 10) << "\n";
    std::cout << "mode_residual " << fmt(a.buckling.residual, 3) << "\n";
    std::cout << "multiplicity_gap " << fmt(a.buckling.multiplicity_gap, 4) << "\n";
  } else {
    std::cout << "lambda none\n";
  }
  std::cout << "linear_solves " << a.linear_solves << "\n";
  std::cout << "wall_s " << fmt(seconds_since(t0), 4) << "\n";
  if (wants(spec, "vtk")) {
    const fs::path dir = prepare_output(spec);
    export_vtk(model.mesh(), design, analysis_fields(model.mesh(), design, a), dir / "analysis.vtk");
  }
  return 0;
}

// --- verify ----------------------------------------------------------------

std::vector<Index> sample_elements(const DesignField& design, std::size_t count, std::uint64_t seed) {
  std::vector<Index> present;
  for (Index e = 0; e < design.size(); ++e)
    if (design.present(e)) present.push_back(e);
  if (present.size() <= count) return present;
  std::mt19937_64 rng(seed);
  std::shuffle(present.begin(), present.end(), rng);
  present.resize(count);
  std::sort(present.begin(), present.end());
  return present;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale}); }

int cmd_verify(const std::string& config, const Globals& g, std::size_t samples, double h) {
  const ProblemSpec spec = load_spec(config, g);
  const OptimizationProblem problem = build_problem(spec);
  const auto& model = problem.model;
  const auto& settings = problem.settings;
  const DesignField design = full_design(model.mesh().element_count(), model.non_design_mask());

  // Tighter than the run settings so the finite differences see converged
  // solves, but above the round-off floor of slender 3D meshes.
  SolverConfig tight = settings.solver;
  tight.rel_tol = std::min(tight.rel_tol, 1e-10);
  EigenConfig eig = settings.eigen;
  eig.tol = std::min(eig.tol, 1e-7);

  const ElementScaling scaling = scaling_for(design, tight.ersatz_eps);
  StiffnessSolver solver(model, scaling, tight);
  const StaticState state = solve_static(solver);
  const BucklingSolution buckling = solve_buckling(solver, state.sigma, eig);
  if (!buckling.found()) throw Error("verify", "design has no positive buckling load factor");

  const SensitivityField adjoint = lambda_sensitivity_adjoint(solver, state, buckling);
  const SensitivityField dJ = compliance_sensitivity(model, state);
  const std::vector<Index> elements = sample_elements(design, samples, spec.solver.seed);
  const std::vector<double> direct = lambda_sensitivity_direct(solver, state, buckling, elements);

  const double p_scale = adjoint.max_abs();
  const double j_scale = dJ.max_abs();
  double max_da = 0.0, max_fd_p = 0.0, max_fd_j = 0.0;
  if (!g.quiet)
    std::printf("%8s %16s %16s %16s %16s %16s\n", "element", "dlambda_adj", "dlambda_dir", "dlambda_fd", "dJ", "dJ_fd");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const Index e = elements[i];
    const double adj = adjoint.values[static_cast<std::size_t>(e)];
    const double jv = dJ.values[static_cast<std::size_t>(e)];
    const double fd_p = finite_difference_oracle(model, scaling, Quantity::lambda, e, h, tight, eig);
    const double fd_j = finite_difference_oracle(model, scaling, Quantity::compliance, e, h, tight, eig);
    max_da = std::max(max_da, rel(adj, direct[i], 0.0));
    if (std::abs(adj) >= 1e-6 * p_scale) max_fd_p = std::max(max_fd_p, rel(adj, fd_p, 0.0));
    if (std::abs(jv) >= 1e-6 * j_scale) max_fd_j = std::max(max_fd_j, rel(jv, fd_j, 0.0));
    if (!g.quiet)
      std::printf("%8td %16.9e %16.9e %16.9e %16.9e %16.9e\n", e, adj, direct[i], fd_p, jv, fd_j);
  }
  std::printf("lambda %.10g\n", buckling.lambda);
  std::printf("max_rel_direct_adjoint %.3e\n", max_da);
  std::printf("max_rel_lambda_fd %.3e\n", max_fd_p);
  std::printf("max_rel_compliance_fd %.3e\n", max_fd_j);
  const bool ok = max_da <= 1e-10 && max_fd_p <= 1e-3 && max_fd_j <= 1e-3;
  std::printf("status %s\n", ok ? "ok" : "mismatch");
  return ok ? 0 : 1;
}

// --- bench -----------------------------------------------------------------

ProblemSpec scaled(ProblemSpec spec, double factor) {
  auto& grid = spec.mesh.grid;
  const bool is_2d = grid.is_2d();
  std::array<double, 3> ratio{1.0, 1.0, 1.0};
  for (int a = 0; a < (is_2d ? 2 : 3); ++a) {
    const int n = std::max(1, static_cast<int>(std::lround(grid.dims[a] * factor)));
    ratio[a] = static_cast<double>(n) / grid.dims[a];
    grid.element_size[a] *= static_cast<double>(grid.dims[a]) / n;
    grid.dims[a] = n;
  }
  auto rescale = [&](FaceSelector& f) {
    for (int a = 0; a < 3; ++a)
      if (auto& r = f.ranges[a]) *r = {static_cast<int>(std::lround((*r)[0] * ratio[a])),
                                      static_cast<int>(std::lround((*r)[1] * ratio[a]))};
  };
  for (auto& s : spec.mesh.supports) rescale(s.face);
  for (auto& p : spec.loads.face_pressures) rescale(p.face);
  for (auto& p : spec.loads.point_loads)
    for (int a = 0; a < 3; ++a) p.node[a] = static_cast<int>(std::lround(p.node[a] * ratio[a]));
  return spec;
}

int cmd_bench(const std::string& config, const Globals& g, const std::vector<double>& scales, Index max_direct) {
  const ProblemSpec base = load_spec(config, g);
  std::printf("%10s %10s %12s %12s %12s %10s %8s %8s\n", "elements", "dofs", "adjoint_s", "direct_s", "ratio",
              "direct", "solves_a", "solves_d");
  for (double s : scales) {
    const OptimizationProblem problem = build_problem(scaled(base, s));
    const auto& model = problem.model;
    const Index n = model.mesh().element_count();
    const DesignField design = full_design(n, model.non_design_mask());
    StiffnessSolver solver(model, scaling_for(design, problem.settings.solver.ersatz_eps), problem.settings.solver);
    const StaticState state = solve_static(solver);
    const BucklingSolution buckling = solve_buckling(solver, state.sigma, problem.settings.eigen);
    if (!buckling.found()) throw Error("bench", "design has no positive buckling load factor");

    std::size_t before = solver.solve_count();
    auto t0 = std::chrono::steady_clock::now();
    (void)lambda_sensitivity_adjoint(solver, state, buckling);
    const double t_adj = seconds_since(t0);
    const std::size_t solves_adj = solver.solve_count() - before;

    std::vector<Index> elements(static_cast<std::size_t>(std::min(n, max_direct)));
    std::iota(elements.begin(), elements.end(), Index{0});
    const bool full = static_cast<Index>(elements.size()) == n;
    before = solver.solve_count();
    t0 = std::chrono::steady_clock::now();
    if (full) (void)lambda_sensitivity_direct(solver, state, buckling);
    else (void)lambda_sensitivity_direct(solver, state, buckling, elements);
    double t_dir = seconds_since(t0);
    const std::size_t solves_dir = solver.solve_count() - before;
    if (!full) t_dir *= static_cast<double>(n) / static_cast<double>(elements.size());

    std::printf("%10td %10td %12.4g %12.4g %12.4g %10s %8zu %8zu\n", n, model.mesh().dof_count(), t_adj, t_dir,
                t_dir / t_adj, full ? "measured" : "scaled", solves_adj, solves_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermo-elastic buckling-constrained topology optimisation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--output-dir", g.output_dir, "Output directory (overrides config and TOBUCK_OUTPUT_DIR)");
  app.add_option("--seed", g.seed, "Seed for the eigensolver start vector and element sampling")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", g.threads, "OpenMP thread count (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress output and warnings");

  std::string config;
  auto* run = app.add_subcommand("run", "Full optimisation");
  run->add_option("config", config, "Config file or fixture name")->required();
  auto* analyze = app.add_subcommand("analyze", "Static and buckling analysis of the full domain");
  analyze->add_option("config", config, "Config file or fixture name")->required();
  auto* verify = app.add_subcommand("verify", "Direct vs adjoint vs finite-difference sensitivity check");
  verify->add_option("config", config, "Config file or fixture name")->required();
  std::size_t samples = 24;
  double h = 1e-4;
  verify->add_option("--samples", samples, "Elements checked against the direct and finite-difference routes");
  verify->add_option("--step", h, "Finite-difference presence step")->check(CLI::Range(1e-6, 1e-2));
  auto* bench = app.add_subcommand("bench", "Direct vs adjoint sensitivity timing sweep");
  bench->add_option("config", config, "Config file or fixture name")->required();
  std::vector<double> scales{1.0};
  Index max_direct = 20000;
  bench->add_option("--scales", scales, "Mesh refinement factors applied to the config grid")->delimiter(',');
  bench->add_option("--max-direct", max_direct, "Elements timed directly before extrapolating");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (g.threads > 0) omp_set_num_threads(g.threads);
  std::unique_ptr<ScopedWarningCapture> mute;
  if (g.quiet) mute = std::make_unique<ScopedWarningCapture>();

  try {
    if (*run) return cmd_run(config, g);
    if (*analyze) return cmd_analyze(config, g);
    if (*verify) return cmd_verify(config, g, samples, h);
    if (*bench) return cmd_bench(config, g, scales, max_direct);
  } catch (const ConfigError& e) {
    std::string joined;
    for (const auto& p : e.problems()) joined += (joined.empty() ? "" : "; ") + p;
    std::cerr << "error: config: " << joined << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
