#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "tobuck/linear_solver.hpp"

namespace tobuck {

struct EigenConfig {
  double tol = 1e-8;          ///< target for ||K v + lambda Ksigma v|| / ||K v||
  int max_basis = 40;         ///< Lanczos basis size before a thick restart
  int keep = 8;               ///< Ritz vectors retained across restarts
  int max_restarts = 60;
  std::uint64_t seed = 20170501;
  double gap_warning = 0.02;  ///< warn when the next eigenvalue is this close (relative)

  std::vector<std::string> problems() const;
};

enum class BucklingStatus {
  converged,
  no_buckling,  ///< no positive load factor: the stress state never destabilises
};

struct BucklingSolution {
  BucklingStatus status = BucklingStatus::no_buckling;
  double lambda = 0.0;         ///< smallest positive load factor
  Eigen::VectorXd mode;        ///< K-normalised, first significant component positive
  double residual = 0.0;       ///< ||K v + lambda Ksigma v|| / ||K v||
  double multiplicity_gap = 0; ///< (lambda_2 - lambda_1) / lambda_1, +inf if no second positive value found
  int solves = 0;              ///< inner linear solves used

  bool found() const noexcept { return status == BucklingStatus::converged; }
};

/// Smallest positive lambda of (K + lambda Ksigma) v = 0.
///
/// Runs thick-restart Lanczos on K^{-1}(-Ksigma), which is self-adjoint in the
/// K inner product; its largest positive eigenvalue is 1/lambda_min. Inner
/// solves go through `solver`. Returns status `no_buckling` when the spectrum
/// has no positive part (all-tension stress state).
BucklingSolution solve_buckling(StiffnessSolver& solver, const StressField& sigma, const EigenConfig& config);

/// ||K v + lambda Ksigma v|| / ||K v|| using the matrix-free operators.
double rayleigh_residual(const AnalysisModel& model, const ElementScaling& scaling, const StressField& sigma,
                         double lambda, const Eigen::VectorXd& v);

/// Flips v so that its first component with |v_i| > 1e-6 ||v||_inf is positive.
void normalize_mode_sign(Eigen::VectorXd& v);

}  // namespace tobuck
