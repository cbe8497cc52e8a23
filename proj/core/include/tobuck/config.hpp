#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tobuck/linear_solver.hpp"
#include "tobuck/model.hpp"
#include "tobuck/optimizer.hpp"

namespace tobuck {

struct MeshBlock {
  GridSpec grid;
  std::vector<Support> supports;
  NonDesignOptions non_design;
  bool operator==(const MeshBlock&) const = default;
};

struct ConstraintBlock {
  std::optional<double> a1;
  std::optional<double> a2;
  double v_target = 0.0;
  bool operator==(const ConstraintBlock&) const = default;
};

struct SolverBlock {
  double rel_tol = 1e-8;
  double eig_tol = 1e-8;
  double filter_radius = 0.0;  ///< [m]
  double ersatz_eps = 1e-6;
  double dv0 = 0.025;
  LinearSolverKind linear = LinearSolverKind::cholesky;
  int max_iters = 20000;
  std::uint64_t seed = 20170501;
  bool operator==(const SolverBlock&) const = default;
};

struct OutputBlock {
  std::string directory = "out";
  std::vector<std::string> formats{"vtk", "csv"};
  int export_every = 0;  ///< 0: final topology only, n: every n-th accepted iteration
  bool operator==(const OutputBlock&) const = default;
};

struct ProblemSpec {
  std::string description;
  MeshBlock mesh;
  Material material;
  LoadCase loads;
  ConstraintBlock constraints;
  SolverBlock solver;
  OutputBlock output;
  bool operator==(const ProblemSpec&) const = default;
};

/// Parses a JSON problem description. Every problem found (missing block,
/// unknown key, wrong type, out-of-range value) is reported in one ConfigError.
/// An empty document is treated as an empty object.
ProblemSpec parse_problem_text(std::string_view text);

/// Reads and parses a file. Throws ConfigError when it cannot be read.
ProblemSpec parse_problem_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_problem_text(serialize_problem(s)) == s.
std::string serialize_problem(const ProblemSpec& spec);

/// Resolves supports and loads and collects the optimizer settings.
OptimizationProblem build_problem(const ProblemSpec& spec);

/// Accepts a path, or the bare name of a shipped fixture ("column_small").
std::filesystem::path resolve_config_path(std::string_view name_or_path,
                                          const std::vector<std::filesystem::path>& fixture_dirs);

}  // namespace tobuck
