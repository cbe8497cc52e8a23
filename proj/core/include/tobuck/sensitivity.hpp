#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tobuck/buckling.hpp"
#include "tobuck/linear_solver.hpp"

namespace tobuck {

enum class SensitivityKind { buckling_direct, buckling_adjoint, compliance, combined };

std::string_view to_string(SensitivityKind kind);

/// Per-element derivative with respect to element presence x_e, taken at the
/// current design (present elements at x_e = 1, void elements as if
/// re-inserted on top of their ersatz state).
struct SensitivityField {
  std::vector<double> values;
  SensitivityKind kind = SensitivityKind::combined;
  bool filtered = false;

  Index size() const noexcept { return static_cast<Index>(values.size()); }
  double max_abs() const;
};

/// Stress-space adjoint (one column per element) and DOF-space adjoint.
struct AdjointVectors {
  Eigen::MatrixXd mu;
  Eigen::VectorXd w;
};

/// dK/dx_e as an element block: the unscaled reference stiffness k_e.
const ElementMatrix& dK_per_element(const AnalysisModel& model, Index e);

/// Component k holds v_e^T (integral of G^T dS/dsigma_k G) v_e.
StressVector ksigma_mode_contraction(const AnalysisModel& model, const Eigen::VectorXd& v, Index e);

/// d sigma_j / d x_e for every element j (one column each). Costs one global solve.
Eigen::MatrixXd stress_sensitivity_direct(StiffnessSolver& solver, const StaticState& state, Index e);

/// Buckling-factor sensitivity by the direct method: one global solve per element.
SensitivityField lambda_sensitivity_direct(StiffnessSolver& solver, const StaticState& state,
                                           const BucklingSolution& buckling);

/// Direct method restricted to the listed elements (one global solve each).
std::vector<double> lambda_sensitivity_direct(StiffnessSolver& solver, const StaticState& state,
                                              const BucklingSolution& buckling, std::span<const Index> elements);

/// mu_e = -lambda * ksigma_mode_contraction(v, e) for stress-carrying elements, zero elsewhere.
Eigen::MatrixXd adjoint_mu(const AnalysisModel& model, const ElementScaling& scaling, const BucklingSolution& buckling);

/// Solves K w = -Y^T mu (one global solve).
Eigen::VectorXd adjoint_w(StiffnessSolver& solver, const Eigen::MatrixXd& mu);

/// Buckling-factor sensitivity by the adjoint method from precomputed adjoints.
SensitivityField lambda_sensitivity_adjoint(const StiffnessSolver& solver, const StaticState& state,
                                            const BucklingSolution& buckling, const AdjointVectors& adjoints);

/// Convenience: adjoint_mu + adjoint_w + lambda_sensitivity_adjoint.
SensitivityField lambda_sensitivity_adjoint(StiffnessSolver& solver, const StaticState& state,
                                            const BucklingSolution& buckling);

/// J'_e = 2 d_e^T f_e^th - d_e^T k_e d_e.
SensitivityField compliance_sensitivity(const AnalysisModel& model, const StaticState& state);

enum class Quantity { lambda, compliance };

/// Central difference of lambda or J under scaling the stiffness, thermal load
/// and stress of present element e by (1 +- h). Re-runs the static and
/// buckling solves with the supplied (tight) tolerances.
double finite_difference_oracle(const AnalysisModel& model, const ElementScaling& scaling, Quantity quantity,
                                Index e, double h, const SolverConfig& solver_config,
                                const EigenConfig& eigen_config);

/// Distance-weighted average over element centres within `radius` [m], with
/// weights (radius - distance). radius 0 returns the input.
SensitivityField radial_filter(const VoxelMesh& mesh, const SensitivityField& field, double radius);

/// As above, averaging only over elements with support[e] != 0. Elements with
/// no supported element within the radius get the lowest finite double.
SensitivityField radial_filter(const VoxelMesh& mesh, const SensitivityField& field, double radius,
                               const std::vector<std::uint8_t>& support);

}  // namespace tobuck
