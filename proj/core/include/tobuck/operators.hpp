#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tobuck/element.hpp"
#include "tobuck/model.hpp"

namespace tobuck {

/// Design-independent analysis data: mesh, material, resolved loads and the
/// reference element kernels every element shares.
class AnalysisModel {
 public:
  explicit AnalysisModel(GridModel grid);

  const VoxelMesh& mesh() const noexcept { return grid_.mesh; }
  const Material& material() const noexcept { return grid_.material; }
  const LoadCase& loads() const noexcept { return grid_.loads; }
  const GridModel& grid() const noexcept { return grid_; }
  const ElementKernels& kernels() const noexcept { return kernels_; }

  double delta_t() const noexcept { return grid_.loads.delta_t; }
  const StressVector& thermal_strain() const noexcept { return eps_th_; }
  /// Thermal load of one fully present element.
  const ElementVector& element_thermal_load() const noexcept { return f_th_element_; }
  const Eigen::VectorXd& structural_load() const noexcept { return grid_.structural_load; }
  const std::vector<std::uint8_t>& non_design_mask() const noexcept { return grid_.non_design_mask; }

  /// Gathers the element-local slice of a global DOF vector.
  ElementVector gather(const Eigen::VectorXd& x, Index e) const;
  /// Adds an element-local vector into a global one, skipping fixed DOFs.
  void scatter_add(const ElementVector& local, Index e, Eigen::VectorXd& y) const;

 private:
  GridModel grid_;
  ElementKernels kernels_;
  StressVector eps_th_;
  ElementVector f_th_element_;
};

/// Per-element material scale factors. `stiffness` multiplies k_e and the
/// element thermal load; `stress` multiplies the recovered stress that feeds
/// the geometric stiffness. Present elements are (1, 1), void (ersatz, 0).
struct ElementScaling {
  std::vector<double> stiffness;
  std::vector<double> stress;

  Index size() const noexcept { return static_cast<Index>(stiffness.size()); }
};

ElementScaling scaling_for(const DesignField& design, double ersatz_eps);

/// Per-element centre stress, one column per element.
using StressField = Eigen::MatrixXd;

/// K x with the symmetric zero-row/column, unit-diagonal treatment of fixed DOFs.
Eigen::VectorXd stiffness_matvec(const AnalysisModel& model, const ElementScaling& scaling,
                                 const Eigen::VectorXd& x);

/// Ksigma x. Fixed DOFs carry zero rows and columns.
Eigen::VectorXd geometric_matvec(const AnalysisModel& model, const StressField& sigma, const Eigen::VectorXd& x);

/// Diagonal of K assembled element by element (ones on fixed DOFs).
Eigen::VectorXd stiffness_diagonal(const AnalysisModel& model, const ElementScaling& scaling);

/// Sparse K (lower and upper triangles) with the same fixed-DOF treatment.
Eigen::SparseMatrix<double> assemble_stiffness(const AnalysisModel& model, const ElementScaling& scaling);

/// Global thermal load sum_e scale_e * f_e^th (zero on fixed DOFs).
Eigen::VectorXd thermal_load(const AnalysisModel& model, const ElementScaling& scaling);

/// f_st + f_th.
Eigen::VectorXd total_load(const AnalysisModel& model, const ElementScaling& scaling);

/// sigma_e = scale_e * D (B_c d_e - eps_th); zero where the stress scale is zero.
StressField recover_stress(const AnalysisModel& model, const ElementScaling& scaling, const Eigen::VectorXd& d);

/// f^T d.
double compliance(const Eigen::VectorXd& d, const Eigen::VectorXd& f);

}  // namespace tobuck
