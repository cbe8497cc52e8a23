#include "tobuck/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

std::string_view to_string(SensitivityKind kind) {
  switch (kind) {
    case SensitivityKind::buckling_direct: return "buckling_direct";
    case SensitivityKind::buckling_adjoint: return "buckling_adjoint";
    case SensitivityKind::compliance: return "compliance";
    case SensitivityKind::combined: return "combined";
  }
  return "?";
}

double SensitivityField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

const ElementMatrix& dK_per_element(const AnalysisModel& model, Index e) {
  if (e < 0 || e >= model.mesh().element_count()) throw InvalidArgument("element index out of range");
  return model.kernels().stiffness();
}

StressVector ksigma_mode_contraction(const AnalysisModel& model, const Eigen::VectorXd& v, Index e) {
  const auto& kern = model.kernels();
  const ElementVector ve = model.gather(v, e);
  StressVector c(kern.stress_components());
  for (int k = 0; k < kern.stress_components(); ++k) c[k] = ve.dot(kern.stress_basis(k) * ve);
  return c;
}

namespace {

void require_buckling(const BucklingSolution& b) {
  if (!b.found()) throw InvalidArgument("buckling sensitivity requested without a positive load factor");
}

Eigen::MatrixXd all_contractions(const AnalysisModel& model, const Eigen::VectorXd& v) {
  const Index n = model.mesh().element_count();
  Eigen::MatrixXd c(model.kernels().stress_components(), n);
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e) c.col(e) = ksigma_mode_contraction(model, v, e);
  return c;
}

// v^T Ksigma v, rejected when it vanishes relative to v^T K v.
double mode_denominator(const StiffnessSolver& solver, const StressField& sigma, const Eigen::VectorXd& v) {
  const double vgv = v.dot(geometric_matvec(solver.model(), sigma, v));
  const double vkv = v.dot(solver.apply(v));
  if (!(std::abs(vgv) >= 1e-12 * std::abs(vkv)) || vgv == 0.0)
    throw InvalidArgument("degenerate buckling denominator v^T Ksigma v (no compression)");
  return vgv;
}

// D (B_c d_e - eps_th): the stress element e carries when fully present.
StressVector own_stress(const AnalysisModel& model, const Eigen::VectorXd& d, Index e) {
  const auto& kern = model.kernels();
  return kern.center_stress() * model.gather(d, e) - kern.elasticity() * model.thermal_strain();
}

}  // namespace

Eigen::MatrixXd stress_sensitivity_direct(StiffnessSolver& solver, const StaticState& state, Index e) {
  const auto& model = solver.model();
  const auto& scaling = solver.scaling();
  const auto& kern = model.kernels();
  const Index n = model.mesh().element_count();
  if (e < 0 || e >= n) throw InvalidArgument("element index out of range");

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.mesh().dof_count());
  const ElementVector de = model.gather(state.d, e);
  model.scatter_add(model.element_thermal_load() - kern.stiffness() * de, e, rhs);
  const Eigen::VectorXd dd = solver.solve(rhs);

  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(kern.stress_components(), n);
  for (Index j = 0; j < n; ++j) {
    const double s = scaling.stress[static_cast<std::size_t>(j)];
    if (s != 0.0) ds.col(j) = s * (kern.center_stress() * model.gather(dd, j));
  }
  ds.col(e) += own_stress(model, state.d, e);
  return ds;
}

namespace {

double direct_term(StiffnessSolver& solver, const StaticState& state, const BucklingSolution& buckling,
                   const Eigen::MatrixXd& c, double denom, Index e) {
  const auto& model = solver.model();
  const Eigen::MatrixXd ds = stress_sensitivity_direct(solver, state, e);
  const double stress_term = (c.array() * ds.array()).sum();
  const ElementVector ve = model.gather(buckling.mode, e);
  const double stiffness_term = ve.dot(model.kernels().stiffness() * ve);
  return -(stiffness_term + buckling.lambda * stress_term) / denom;
}

}  // namespace

SensitivityField lambda_sensitivity_direct(StiffnessSolver& solver, const StaticState& state,
                                           const BucklingSolution& buckling) {
  require_buckling(buckling);
  const auto& model = solver.model();
  const Index n = model.mesh().element_count();
  const double denom = mode_denominator(solver, state.sigma, buckling.mode);
  const Eigen::MatrixXd c = all_contractions(model, buckling.mode);

  SensitivityField out;
  out.kind = SensitivityKind::buckling_direct;
  out.values.resize(static_cast<std::size_t>(n));
  for (Index e = 0; e < n; ++e) out.values[static_cast<std::size_t>(e)] = direct_term(solver, state, buckling, c, denom, e);
  return out;
}

std::vector<double> lambda_sensitivity_direct(StiffnessSolver& solver, const StaticState& state,
                                              const BucklingSolution& buckling, std::span<const Index> elements) {
  require_buckling(buckling);
  const auto& model = solver.model();
  const double denom = mode_denominator(solver, state.sigma, buckling.mode);
  const Eigen::MatrixXd c = all_contractions(model, buckling.mode);
  std::vector<double> out;
  out.reserve(elements.size());
  for (Index e : elements) out.push_back(direct_term(solver, state, buckling, c, denom, e));
  return out;
}

Eigen::MatrixXd adjoint_mu(const AnalysisModel& model, const ElementScaling& scaling, const BucklingSolution& buckling) {
  require_buckling(buckling);
  const Index n = model.mesh().element_count();
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(model.kernels().stress_components(), n);
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e)
    if (scaling.stress[static_cast<std::size_t>(e)] != 0.0)
      mu.col(e) = -buckling.lambda * ksigma_mode_contraction(model, buckling.mode, e);
  return mu;
}

Eigen::VectorXd adjoint_w(StiffnessSolver& solver, const Eigen::MatrixXd& mu) {
  const auto& model = solver.model();
  const auto& scaling = solver.scaling();
  const auto& yc = model.kernels().center_stress();
  const Index n = model.mesh().element_count();
  if (mu.cols() != n) throw InvalidArgument("adjoint_w: mu has the wrong number of elements");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.mesh().dof_count());
  for (Index e = 0; e < n; ++e) {
    const double s = scaling.stress[static_cast<std::size_t>(e)];
    if (s == 0.0 || mu.col(e).isZero(0.0)) continue;
    model.scatter_add(-s * (yc.transpose() * mu.col(e)), e, rhs);
  }
  return solver.solve(rhs);
}

SensitivityField lambda_sensitivity_adjoint(const StiffnessSolver& solver, const StaticState& state,
                                            const BucklingSolution& buckling, const AdjointVectors& adjoints) {
  require_buckling(buckling);
  const auto& model = solver.model();
  const auto& scaling = solver.scaling();
  const auto& kern = model.kernels();
  const auto& ke = kern.stiffness();
  const Index n = model.mesh().element_count();
  const double denom = mode_denominator(solver, state.sigma, buckling.mode);
  const StressVector d_eps = kern.elasticity() * model.thermal_strain();
  const ElementVector& fe = model.element_thermal_load();

  SensitivityField out;
  out.kind = SensitivityKind::buckling_adjoint;
  out.values.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e) {
    const ElementVector ve = model.gather(buckling.mode, e);
    const ElementVector de = model.gather(state.d, e);
    const ElementVector we = model.gather(adjoints.w, e);
    // Void elements are evaluated as if re-inserted, with the multiplier their
    // stress would receive.
    const StressVector mu_e = scaling.stress[static_cast<std::size_t>(e)] != 0.0
                                  ? StressVector(adjoints.mu.col(e))
                                  : StressVector(-buckling.lambda * ksigma_mode_contraction(model, buckling.mode, e));
    const double numer = ve.dot(ke * ve) + mu_e.dot(d_eps) - mu_e.dot(kern.center_stress() * de) + we.dot(fe) -
                         we.dot(ke * de);
    out.values[static_cast<std::size_t>(e)] = -numer / denom;
  }
  return out;
}

SensitivityField lambda_sensitivity_adjoint(StiffnessSolver& solver, const StaticState& state,
                                            const BucklingSolution& buckling) {
  AdjointVectors adj;
  adj.mu = adjoint_mu(solver.model(), solver.scaling(), buckling);
  adj.w = adjoint_w(solver, adj.mu);
  return lambda_sensitivity_adjoint(solver, state, buckling, adj);
}

SensitivityField compliance_sensitivity(const AnalysisModel& model, const StaticState& state) {
  const auto& ke = model.kernels().stiffness();
  const ElementVector& fe = model.element_thermal_load();
  const Index n = model.mesh().element_count();
  SensitivityField out;
  out.kind = SensitivityKind::compliance;
  out.values.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e) {
    const ElementVector de = model.gather(state.d, e);
    out.values[static_cast<std::size_t>(e)] = 2.0 * de.dot(fe) - de.dot(ke * de);
  }
  return out;
}

double finite_difference_oracle(const AnalysisModel& model, const ElementScaling& scaling, Quantity quantity,
                                Index e, double h, const SolverConfig& solver_config,
                                const EigenConfig& eigen_config) {
  if (!(h >= 1e-6 && h <= 1e-2)) throw InvalidArgument("finite-difference step must lie in [1e-6, 1e-2]");
  if (e < 0 || e >= scaling.size()) throw InvalidArgument("element index out of range");
  if (scaling.stress[static_cast<std::size_t>(e)] == 0.0)
    throw InvalidArgument("finite-difference oracle needs a present element");

  auto evaluate = [&](double factor) {
    ElementScaling s = scaling;
    s.stiffness[static_cast<std::size_t>(e)] *= factor;
    s.stress[static_cast<std::size_t>(e)] *= factor;
    StiffnessSolver solver(model, std::move(s), solver_config);
    const StaticState state = solve_static(solver);
    if (quantity == Quantity::compliance) return state.compliance;
    const BucklingSolution b = solve_buckling(solver, state.sigma, eigen_config);
    if (!b.found()) throw SolverError("finite-difference oracle: perturbed design has no buckling load", 0.0, 0);
    return b.lambda;
  };
  return (evaluate(1.0 + h) - evaluate(1.0 - h)) / (2.0 * h);
}

SensitivityField radial_filter(const VoxelMesh& mesh, const SensitivityField& field, double radius) {
  return radial_filter(mesh, field, radius, {});
}

SensitivityField radial_filter(const VoxelMesh& mesh, const SensitivityField& field, double radius,
                               const std::vector<std::uint8_t>& support) {
  if (!(radius >= 0.0)) throw InvalidArgument("filter radius must be >= 0");
  if (field.size() != mesh.element_count()) throw InvalidArgument("filter: field size does not match mesh");
  if (!support.empty() && static_cast<Index>(support.size()) != mesh.element_count())
    throw InvalidArgument("filter: support size does not match mesh");
  auto supported = [&](Index e) { return support.empty() || support[static_cast<std::size_t>(e)] != 0; };
  constexpr double kUnsupported = std::numeric_limits<double>::lowest();
  SensitivityField out = field;
  out.filtered = true;
  if (radius == 0.0) {
    for (Index e = 0; e < mesh.element_count(); ++e)
      if (!supported(e)) out.values[static_cast<std::size_t>(e)] = kUnsupported;
    return out;
  }

  const auto& h = mesh.spec().element_size;
  const auto& dims = mesh.spec().dims;
  const int dim = mesh.dim();
  struct Tap {
    int di, dj, dk;
    double w;
  };
  std::vector<Tap> taps;
  std::array<int, 3> reach{0, 0, 0};
  for (int a = 0; a < dim; ++a) reach[a] = static_cast<int>(std::floor(radius / h[a]));
  for (int dk = -reach[2]; dk <= reach[2]; ++dk)
    for (int dj = -reach[1]; dj <= reach[1]; ++dj)
      for (int di = -reach[0]; di <= reach[0]; ++di) {
        const double dist = std::sqrt(std::pow(di * h[0], 2) + std::pow(dj * h[1], 2) + std::pow(dk * h[2], 2));
        if (dist < radius) taps.push_back({di, dj, dk, radius - dist});
      }

  const Index n = mesh.element_count();
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < n; ++e) {
    const auto l = mesh.element_lattice(e);
    double sum = 0.0;
    double wsum = 0.0;
    for (const auto& t : taps) {
      const int i = l[0] + t.di;
      const int j = l[1] + t.dj;
      const int k = l[2] + t.dk;
      if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= (dim == 2 ? 1 : dims[2])) continue;
      const Index f = mesh.element_index(i, j, k);
      if (!supported(f)) continue;
      sum += t.w * field.values[static_cast<std::size_t>(f)];
      wsum += t.w;
    }
    out.values[static_cast<std::size_t>(e)] = wsum > 0.0 ? sum / wsum : kUnsupported;
  }
  return out;
}

}  // namespace tobuck
