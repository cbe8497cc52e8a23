#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "tobuck/operators.hpp"

namespace tobuck {

enum class LinearSolverKind {
  pcg,       ///< matrix-free conjugate gradients with an element-built Jacobi preconditioner
  cholesky,  ///< assembled sparse K factorised once per design (CHOLMOD)
};

std::string_view to_string(LinearSolverKind kind);
LinearSolverKind parse_linear_solver(std::string_view name);

struct SolverConfig {
  double rel_tol = 1e-8;
  int max_iters = 20000;
  double ersatz_eps = 1e-6;
  LinearSolverKind kind = LinearSolverKind::pcg;

  std::vector<std::string> problems() const;
  void validate() const;
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves K x = b for one design. Every returned solution satisfies
/// ||K x - b|| <= rel_tol ||b|| as measured by the matrix-free operator;
/// otherwise SolverError is thrown. Counts invocations so callers can
/// audit how many global solves an algorithm needs.
class StiffnessSolver {
 public:
  StiffnessSolver(const AnalysisModel& model, ElementScaling scaling, SolverConfig config);
  ~StiffnessSolver();
  StiffnessSolver(StiffnessSolver&&) noexcept;
  StiffnessSolver& operator=(StiffnessSolver&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs);

  const AnalysisModel& model() const noexcept { return *model_; }
  const ElementScaling& scaling() const noexcept { return scaling_; }
  const SolverConfig& config() const noexcept { return config_; }
  std::size_t solve_count() const noexcept { return solve_count_; }
  const SolveStats& last_stats() const noexcept { return last_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return stiffness_matvec(*model_, scaling_, x); }

 private:
  Eigen::VectorXd solve_pcg(const Eigen::VectorXd& rhs);
  Eigen::VectorXd solve_cholesky(const Eigen::VectorXd& rhs);

  const AnalysisModel* model_;
  ElementScaling scaling_;
  SolverConfig config_;
  Eigen::VectorXd inv_diag_;
  struct Factor;
  std::unique_ptr<Factor> factor_;
  std::size_t solve_count_ = 0;
  SolveStats last_;
};

struct StaticState {
  Eigen::VectorXd d;      ///< nodal displacement [m]
  Eigen::VectorXd f;      ///< total load f_st + f_th [N]
  Eigen::VectorXd f_th;   ///< thermal part [N]
  StressField sigma;      ///< element centre stress [Pa]
  double compliance = 0;  ///< f^T d [J]
  SolveStats stats;
};

/// Thermo-elastic static solve followed by centre-stress recovery.
StaticState solve_static(StiffnessSolver& solver);

}  // namespace tobuck
