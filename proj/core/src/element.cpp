#include "tobuck/element.hpp"

#include <cmath>

#include "tobuck/diagnostics.hpp"

namespace tobuck {
namespace {

constexpr std::array<std::array<double, 3>, 8> kSign = {{
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}, {-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1},
}};

// Physical shape-function derivatives at natural point xi: row a = dN_a/dx_j.
Eigen::MatrixXd shape_gradients(int dim, const std::array<double, 3>& xi, const std::array<double, 3>& h) {
  const int npe = dim == 2 ? 4 : 8;
  Eigen::MatrixXd dn(npe, dim);
  const double scale = dim == 2 ? 0.25 : 0.125;
  for (int a = 0; a < npe; ++a) {
    const auto& s = kSign[static_cast<std::size_t>(a)];
    for (int j = 0; j < dim; ++j) {
      double v = scale * s[j];
      for (int m = 0; m < dim; ++m)
        if (m != j) v *= 1.0 + s[m] * xi[m];
      dn(a, j) = v * 2.0 / h[j];
    }
  }
  return dn;
}

Eigen::MatrixXd strain_matrix(int dim, const Eigen::MatrixXd& dn) {
  const int npe = static_cast<int>(dn.rows());
  const int ncomp = dim == 2 ? 3 : 6;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(ncomp, npe * dim);
  for (int a = 0; a < npe; ++a) {
    const int c = a * dim;
    if (dim == 2) {
      b(0, c) = dn(a, 0);
      b(1, c + 1) = dn(a, 1);
      b(2, c) = dn(a, 1);
      b(2, c + 1) = dn(a, 0);
    } else {
      b(0, c) = dn(a, 0);
      b(1, c + 1) = dn(a, 1);
      b(2, c + 2) = dn(a, 2);
      b(3, c) = dn(a, 1);
      b(3, c + 1) = dn(a, 0);
      b(4, c) = dn(a, 2);
      b(4, c + 2) = dn(a, 0);
      b(5, c + 1) = dn(a, 2);
      b(5, c + 2) = dn(a, 1);
    }
  }
  return b;
}

Eigen::MatrixXd gradient_matrix(int dim, const Eigen::MatrixXd& dn) {
  const int npe = static_cast<int>(dn.rows());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim * dim, npe * dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int a = 0; a < npe; ++a) g(i * dim + j, a * dim + i) = dn(a, j);
  return g;
}

// Position of stress component k inside the symmetric dim x dim tensor.
std::array<int, 2> tensor_slot(int k, bool plane_stress) {
  if (plane_stress) {
    constexpr std::array<std::array<int, 2>, 3> slots{{{0, 0}, {1, 1}, {0, 1}}};
    return slots[static_cast<std::size_t>(k)];
  }
  constexpr std::array<std::array<int, 2>, 6> slots{{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
  return slots[static_cast<std::size_t>(k)];
}

}  // namespace

Eigen::MatrixXd elasticity_matrix(const Material& m, bool plane_stress) {
  m.validate();
  if (plane_stress) {
    const double c = m.E / (1.0 - m.nu * m.nu);
    Eigen::MatrixXd d(3, 3);
    d << c, c * m.nu, 0, c * m.nu, c, 0, 0, 0, c * (1.0 - m.nu) / 2.0;
    return d;
  }
  const double lam = m.E * m.nu / ((1.0 + m.nu) * (1.0 - 2.0 * m.nu));
  const double mu = m.E / (2.0 * (1.0 + m.nu));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d(i, j) = lam;
    d(i, i) = lam + 2.0 * mu;
    d(i + 3, i + 3) = mu;
  }
  return d;
}

StressVector thermal_strain(const Material& m, double delta_t, bool plane_stress) {
  const int ncomp = plane_stress ? 3 : 6;
  const int normal = plane_stress ? 2 : 3;
  StressVector eps = StressVector::Zero(ncomp);
  for (int i = 0; i < normal; ++i) eps[i] = m.alpha * delta_t;
  return eps;
}

Eigen::MatrixXd dS_dsigma(int k, bool plane_stress) {
  const int ncomp = plane_stress ? 3 : 6;
  if (k < 1 || k > ncomp)
    throw InvalidArgument("stress component index " + std::to_string(k) + " outside [1, " + std::to_string(ncomp) + "]");
  StressVector unit = StressVector::Zero(ncomp);
  unit[k - 1] = 1.0;
  return stress_matrix(unit, plane_stress);
}

Eigen::MatrixXd stress_matrix(const StressVector& sigma, bool plane_stress) {
  const int dim = plane_stress ? 2 : 3;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < sigma.size(); ++k) {
    const auto [r, c] = tensor_slot(k, plane_stress);
    s(r, c) += sigma[k];
    if (r != c) s(c, r) += sigma[k];
  }
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(dim * dim, dim * dim);
  for (int b = 0; b < dim; ++b) big.block(b * dim, b * dim, dim, dim) = s;
  return big;
}

ElementKernels::ElementKernels(const VoxelMesh& mesh, const Material& material)
    : plane_stress_(mesh.is_2d()),
      ndof_(mesh.dofs_per_element()),
      ncomp_(mesh.stress_components()),
      elasticity_(elasticity_matrix(material, mesh.is_2d())) {
  const int dim = mesh.dim();
  const auto& h = mesh.spec().element_size;
  const double g = 1.0 / std::sqrt(3.0);
  double jac = 1.0;
  for (int j = 0; j < dim; ++j) jac *= h[j] / 2.0;
  if (plane_stress_) jac *= mesh.spec().thickness;

  const int npts = dim == 2 ? 4 : 8;
  for (int p = 0; p < npts; ++p) {
    const auto& s = kSign[static_cast<std::size_t>(p)];
    const std::array<double, 3> xi{g * s[0], g * s[1], g * s[2]};
    const auto dn = shape_gradients(dim, xi, h);
    gauss_.push_back({jac, strain_matrix(dim, dn), gradient_matrix(dim, dn)});
  }

  stiffness_ = ElementMatrix::Zero(ndof_, ndof_);
  strain_integral_ = Eigen::MatrixXd::Zero(ncomp_, ndof_);
  for (const auto& gp : gauss_) {
    stiffness_.noalias() += gp.weight * gp.strain.transpose() * elasticity_ * gp.strain;
    strain_integral_ += gp.weight * gp.strain;
  }
  stiffness_ = 0.5 * (stiffness_ + stiffness_.transpose()).eval();

  const auto dn_center = shape_gradients(dim, {0.0, 0.0, 0.0}, h);
  center_strain_ = strain_matrix(dim, dn_center);
  center_stress_ = elasticity_ * center_strain_;

  for (int k = 0; k < ncomp_; ++k) {
    const Eigen::MatrixXd ds = dS_dsigma(k + 1, plane_stress_);
    ElementMatrix m = ElementMatrix::Zero(ndof_, ndof_);
    for (const auto& gp : gauss_) m.noalias() += gp.weight * gp.gradient.transpose() * ds * gp.gradient;
    stress_basis_.push_back(std::move(m));
  }
}

ElementVector ElementKernels::thermal_load(const StressVector& eps_th) const {
  return strain_integral_.transpose() * (elasticity_ * eps_th);
}

ElementMatrix ElementKernels::geometric_stiffness(const StressVector& sigma) const {
  ElementMatrix k = ElementMatrix::Zero(ndof_, ndof_);
  for (int c = 0; c < ncomp_; ++c)
    if (sigma[c] != 0.0) k += sigma[c] * stress_basis_[static_cast<std::size_t>(c)];
  return k;
}

}  // namespace tobuck
