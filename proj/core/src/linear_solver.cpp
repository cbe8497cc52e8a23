#include "tobuck/linear_solver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/CholmodSupport>
#include <Eigen/SparseCore>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

std::string_view to_string(LinearSolverKind kind) {
  switch (kind) {
    case LinearSolverKind::pcg: return "pcg";
    case LinearSolverKind::cholesky: return "cholesky";
  }
  return "?";
}

LinearSolverKind parse_linear_solver(std::string_view name) {
  if (name == "pcg") return LinearSolverKind::pcg;
  if (name == "cholesky") return LinearSolverKind::cholesky;
  throw InvalidArgument("unknown linear solver '" + std::string(name) + "' (expected pcg or cholesky)");
}

std::vector<std::string> SolverConfig::problems() const {
  std::vector<std::string> out;
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) out.push_back("solver.rel_tol must lie in (0, 1)");
  if (max_iters < 1) out.push_back("solver.max_iters must be >= 1");
  if (!(ersatz_eps > 0.0 && ersatz_eps <= 1e-3)) out.push_back("solver.ersatz_eps must lie in (0, 1e-3]");
  return out;
}

void SolverConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw InvalidArgument(p.front());
}

struct StiffnessSolver::Factor {
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
};

StiffnessSolver::StiffnessSolver(const AnalysisModel& model, ElementScaling scaling, SolverConfig config)
    : model_(&model), scaling_(std::move(scaling)), config_(config) {
  config_.validate();
  if (scaling_.size() != model.mesh().element_count())
    throw InvalidArgument("element scaling size does not match element count");
  if (config_.kind == LinearSolverKind::pcg) {
    inv_diag_ = stiffness_diagonal(model, scaling_).cwiseInverse();
  } else {
    factor_ = std::make_unique<Factor>();
    const Eigen::SparseMatrix<double> k = assemble_stiffness(model, scaling_);
    factor_->llt.compute(k);
    if (factor_->llt.info() != Eigen::Success)
      throw SolverError("stiffness matrix is not positive definite (insufficient constraints?)",
                        std::numeric_limits<double>::infinity(), 0);
  }
}

StiffnessSolver::~StiffnessSolver() = default;
StiffnessSolver::StiffnessSolver(StiffnessSolver&&) noexcept = default;
StiffnessSolver& StiffnessSolver::operator=(StiffnessSolver&&) noexcept = default;

Eigen::VectorXd StiffnessSolver::solve(const Eigen::VectorXd& rhs) {
  if (rhs.size() != model_->mesh().dof_count()) throw InvalidArgument("right-hand side length mismatch");
  ++solve_count_;
  if (rhs.squaredNorm() == 0.0) {
    last_ = {0, 0.0};
    return Eigen::VectorXd::Zero(rhs.size());
  }
  return config_.kind == LinearSolverKind::pcg ? solve_pcg(rhs) : solve_cholesky(rhs);
}

Eigen::VectorXd StiffnessSolver::solve_pcg(const Eigen::VectorXd& b) {
  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag_.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  double rel = 1.0;
  double best = 1.0;
  int since_best = 0;
  // Stagnation window: a consistent SPD system keeps improving its best
  // residual; a singular one (rigid-body modes) plateaus.
  const int window = std::max(200, static_cast<int>(std::sqrt(static_cast<double>(b.size()))) * 20);

  for (int it = 1; it <= config_.max_iters; ++it) {
    const Eigen::VectorXd q = apply(p);
    const double pq = p.dot(q);
    if (!(pq > 0.0))
      throw SolverError("conjugate gradients broke down (p^T K p <= 0): stiffness is singular or indefinite", rel, it);
    const double alpha = rz / pq;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * q;
    rel = r.norm() / bnorm;
    if (rel <= config_.rel_tol) {
      // Guard against drift of the recursive residual.
      const double true_rel = (b - apply(x)).norm() / bnorm;
      if (true_rel <= config_.rel_tol) {
        last_ = {it, true_rel};
        return x;
      }
      r = b - apply(x);
      rel = true_rel;
    }
    if (rel < 0.5 * best) {
      best = rel;
      since_best = 0;
    } else if (++since_best > window) {
      throw SolverError("conjugate gradients stagnated at relative residual " + sci(rel) +
                            " (singular system: insufficient constraints?)",
                        rel, it);
    }
    z = inv_diag_.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("conjugate gradients did not converge in " + std::to_string(config_.max_iters) +
                        " iterations; final relative residual " + sci(rel),
                    rel, config_.max_iters);
}

Eigen::VectorXd StiffnessSolver::solve_cholesky(const Eigen::VectorXd& b) {
  const double bnorm = b.norm();
  Eigen::VectorXd x = factor_->llt.solve(b);
  Eigen::VectorXd r = b - apply(x);
  double rel = r.norm() / bnorm;
  int refinements = 0;
  while (!(rel <= config_.rel_tol) && refinements < 3 && std::isfinite(rel)) {
    x += factor_->llt.solve(r);
    r = b - apply(x);
    rel = r.norm() / bnorm;
    ++refinements;
  }
  if (!(rel <= config_.rel_tol))
    throw SolverError("direct solve missed the residual target; final relative residual " + sci(rel),
                      rel, refinements);
  last_ = {refinements + 1, rel};
  return x;
}

StaticState solve_static(StiffnessSolver& solver) {
  const auto& model = solver.model();
  StaticState s;
  s.f_th = thermal_load(model, solver.scaling());
  s.f = model.structural_load() + s.f_th;
  if (s.f.squaredNorm() == 0.0) warn("static solve with zero load; displacement is identically zero");
  s.d = solver.solve(s.f);
  s.stats = solver.last_stats();
  s.sigma = recover_stress(model, solver.scaling(), s.d);
  s.compliance = compliance(s.d, s.f);
  return s;
}

}  // namespace tobuck
