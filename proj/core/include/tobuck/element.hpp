#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "tobuck/model.hpp"

namespace tobuck {

// Dynamic shapes with inline storage: 24x24 for an 8-node brick, 8x8 for a quad.
using ElementMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 24, 24>;
using ElementVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 24, 1>;
using StressVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 6, 1>;

/// Isotropic elasticity matrix; 6x6 in Voigt order [xx, yy, zz, xy, xz, yz]
/// or 3x3 plane stress [xx, yy, xy].
Eigen::MatrixXd elasticity_matrix(const Material& material, bool plane_stress);

/// alpha * delta_t on the normal components, zero shear.
StressVector thermal_strain(const Material& material, double delta_t, bool plane_stress);

/// Derivative of the block-diagonal stress matrix S with respect to stress
/// component k (1-based, Voigt order). Returns the dim^2 x dim^2 matrix.
Eigen::MatrixXd dS_dsigma(int k, bool plane_stress);

/// Block-diagonal S assembled from a stress vector.
Eigen::MatrixXd stress_matrix(const StressVector& sigma, bool plane_stress);

/// Reference-element quantities shared by every element of a voxel mesh.
///
/// Integrals use full 2-point Gauss quadrature per axis. In 2D the plane-stress
/// thickness is folded into the quadrature weights, so every matrix here is an
/// integral over the element volume.
class ElementKernels {
 public:
  struct GaussPoint {
    double weight;             ///< quadrature weight times |J| (times thickness in 2D)
    Eigen::MatrixXd strain;    ///< B, ncomp x ndof
    Eigen::MatrixXd gradient;  ///< G, dim^2 x ndof; rows grouped per displacement component
  };

  ElementKernels(const VoxelMesh& mesh, const Material& material);

  bool plane_stress() const noexcept { return plane_stress_; }
  int dofs() const noexcept { return ndof_; }
  int stress_components() const noexcept { return ncomp_; }

  const ElementMatrix& stiffness() const noexcept { return stiffness_; }
  const Eigen::MatrixXd& elasticity() const noexcept { return elasticity_; }
  const std::vector<GaussPoint>& gauss_points() const noexcept { return gauss_; }

  /// B evaluated at the element centre.
  const Eigen::MatrixXd& center_strain() const noexcept { return center_strain_; }
  /// D * B at the element centre (maps element DOFs to centre stress).
  const Eigen::MatrixXd& center_stress() const noexcept { return center_stress_; }

  /// Integral of G^T dS/dsigma_k G; the geometric stiffness is
  /// sum_k sigma_k * stress_basis(k). k is 0-based here.
  const ElementMatrix& stress_basis(int k) const noexcept { return stress_basis_[static_cast<std::size_t>(k)]; }

  /// Integral of B^T D eps_th over the element.
  ElementVector thermal_load(const StressVector& eps_th) const;

  /// Integral of G^T S(sigma) G, with the same sigma at every Gauss point.
  ElementMatrix geometric_stiffness(const StressVector& sigma) const;

 private:
  bool plane_stress_;
  int ndof_;
  int ncomp_;
  Eigen::MatrixXd elasticity_;
  std::vector<GaussPoint> gauss_;
  ElementMatrix stiffness_;
  Eigen::MatrixXd center_strain_;
  Eigen::MatrixXd center_stress_;
  Eigen::MatrixXd strain_integral_;  // sum_g w_g B_g
  std::vector<ElementMatrix> stress_basis_;
};

}  // namespace tobuck
