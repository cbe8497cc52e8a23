#include "tobuck/operators.hpp"

#include <vector>

#include <Eigen/SparseCore>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

AnalysisModel::AnalysisModel(GridModel grid)
    : grid_(std::move(grid)),
      kernels_(grid_.mesh, grid_.material),
      eps_th_(tobuck::thermal_strain(grid_.material, grid_.loads.delta_t, grid_.mesh.is_2d())),
      f_th_element_(kernels_.thermal_load(eps_th_)) {
  if (grid_.structural_load.size() != grid_.mesh.dof_count())
    throw InvalidArgument("structural load length does not match DOF count");
}

ElementVector AnalysisModel::gather(const Eigen::VectorXd& x, Index e) const {
  const auto dofs = grid_.mesh.element_dofs(e);
  ElementVector local(static_cast<Index>(dofs.size()));
  for (std::size_t a = 0; a < dofs.size(); ++a)
    local[static_cast<Index>(a)] = grid_.mesh.is_fixed(dofs[a]) ? 0.0 : x[dofs[a]];
  return local;
}

void AnalysisModel::scatter_add(const ElementVector& local, Index e, Eigen::VectorXd& y) const {
  const auto dofs = grid_.mesh.element_dofs(e);
  for (std::size_t a = 0; a < dofs.size(); ++a)
    if (!grid_.mesh.is_fixed(dofs[a])) y[dofs[a]] += local[static_cast<Index>(a)];
}

ElementScaling scaling_for(const DesignField& design, double ersatz_eps) {
  ElementScaling s;
  const auto n = design.presence.size();
  s.stiffness.resize(n);
  s.stress.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    const bool on = design.presence[e] != 0;
    s.stiffness[e] = on ? 1.0 : ersatz_eps;
    s.stress[e] = on ? 1.0 : 0.0;
  }
  return s;
}

namespace {

void check_length(const AnalysisModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.mesh().dof_count())
    throw InvalidArgument("vector length " + std::to_string(x.size()) + " does not match DOF count " +
                          std::to_string(model.mesh().dof_count()));
}

void check_scaling(const AnalysisModel& model, const ElementScaling& s) {
  if (s.size() != model.mesh().element_count() || s.stress.size() != s.stiffness.size())
    throw InvalidArgument("element scaling size does not match element count");
}

// Applies `op(e, x_e) -> y_e` to every element and accumulates the result.
// Colours share no nodes, so each colour is scattered in parallel while every
// DOF still receives its contributions in a fixed order.
template <typename ElementOp>
Eigen::VectorXd colored_apply(const AnalysisModel& model, const Eigen::VectorXd& x, ElementOp&& op) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (const auto& color : model.mesh().colors()) {
    const auto count = static_cast<Index>(color.size());
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < count; ++c) {
      const Index e = color[static_cast<std::size_t>(c)];
      const ElementVector xe = model.gather(x, e);
      if (xe.isZero(0.0)) continue;
      ElementVector ye = op(e, xe);
      model.scatter_add(ye, e, y);
    }
  }
  return y;
}

}  // namespace

Eigen::VectorXd stiffness_matvec(const AnalysisModel& model, const ElementScaling& scaling, const Eigen::VectorXd& x) {
  check_length(model, x);
  check_scaling(model, scaling);
  const auto& ke = model.kernels().stiffness();
  Eigen::VectorXd y = colored_apply(model, x, [&](Index e, const ElementVector& xe) -> ElementVector {
    return scaling.stiffness[static_cast<std::size_t>(e)] * (ke * xe);
  });
  for (Index dof : model.mesh().fixed_dofs()) y[dof] = x[dof];
  return y;
}

Eigen::VectorXd geometric_matvec(const AnalysisModel& model, const StressField& sigma, const Eigen::VectorXd& x) {
  check_length(model, x);
  const auto& kern = model.kernels();
  if (sigma.cols() != model.mesh().element_count() || sigma.rows() != kern.stress_components())
    throw InvalidArgument("stress field shape does not match the mesh");
  return colored_apply(model, x, [&](Index e, const ElementVector& xe) -> ElementVector {
    ElementVector ye = ElementVector::Zero(xe.size());
    for (int k = 0; k < kern.stress_components(); ++k) {
      const double s = sigma(k, e);
      if (s != 0.0) ye.noalias() += s * (kern.stress_basis(k) * xe);
    }
    return ye;
  });
}

Eigen::VectorXd stiffness_diagonal(const AnalysisModel& model, const ElementScaling& scaling) {
  check_scaling(model, scaling);
  const auto& mesh = model.mesh();
  const ElementVector kd = model.kernels().stiffness().diagonal();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(mesh.dof_count());
  for (Index e = 0; e < mesh.element_count(); ++e) model.scatter_add(scaling.stiffness[static_cast<std::size_t>(e)] * kd, e, diag);
  for (Index dof : mesh.fixed_dofs()) diag[dof] = 1.0;
  return diag;
}

Eigen::SparseMatrix<double> assemble_stiffness(const AnalysisModel& model, const ElementScaling& scaling) {
  check_scaling(model, scaling);
  const auto& mesh = model.mesh();
  const auto& ke = model.kernels().stiffness();
  const int n = mesh.dofs_per_element();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.element_count() * n * n + mesh.dof_count()));
  for (Index e = 0; e < mesh.element_count(); ++e) {
    const double s = scaling.stiffness[static_cast<std::size_t>(e)];
    const auto dofs = mesh.element_dofs(e);
    for (int a = 0; a < n; ++a) {
      if (mesh.is_fixed(dofs[static_cast<std::size_t>(a)])) continue;
      for (int b = 0; b < n; ++b) {
        if (mesh.is_fixed(dofs[static_cast<std::size_t>(b)])) continue;
        triplets.emplace_back(dofs[static_cast<std::size_t>(a)], dofs[static_cast<std::size_t>(b)], s * ke(a, b));
      }
    }
  }
  for (Index dof : mesh.fixed_dofs()) triplets.emplace_back(dof, dof, 1.0);
  Eigen::SparseMatrix<double> k(mesh.dof_count(), mesh.dof_count());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

Eigen::VectorXd thermal_load(const AnalysisModel& model, const ElementScaling& scaling) {
  check_scaling(model, scaling);
  const auto& mesh = model.mesh();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());
  if (model.delta_t() == 0.0) return f;
  const auto& fe = model.element_thermal_load();
  for (Index e = 0; e < mesh.element_count(); ++e) model.scatter_add(scaling.stiffness[static_cast<std::size_t>(e)] * fe, e, f);
  return f;
}

Eigen::VectorXd total_load(const AnalysisModel& model, const ElementScaling& scaling) {
  return model.structural_load() + thermal_load(model, scaling);
}

StressField recover_stress(const AnalysisModel& model, const ElementScaling& scaling, const Eigen::VectorXd& d) {
  check_length(model, d);
  check_scaling(model, scaling);
  const auto& kern = model.kernels();
  const Index n = model.mesh().element_count();
  const StressVector eps_stress = kern.elasticity() * model.thermal_strain();
  StressField sigma = StressField::Zero(kern.stress_components(), n);
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e) {
    const double s = scaling.stress[static_cast<std::size_t>(e)];
    if (s == 0.0) continue;
    sigma.col(e) = s * (kern.center_stress() * model.gather(d, e) - eps_stress);
  }
  return sigma;
}

double compliance(const Eigen::VectorXd& d, const Eigen::VectorXd& f) {
  if (d.size() != f.size()) throw InvalidArgument("compliance: vector length mismatch");
  return f.dot(d);
}

}  // namespace tobuck
