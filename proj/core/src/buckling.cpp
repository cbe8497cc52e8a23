#include "tobuck/buckling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

std::vector<std::string> EigenConfig::problems() const {
  std::vector<std::string> out;
  if (!(tol > 0.0 && tol < 1.0)) out.push_back("solver.eig_tol must lie in (0, 1)");
  if (max_basis < 4) out.push_back("eigensolver basis must hold at least 4 vectors");
  if (keep < 1 || keep >= max_basis) out.push_back("eigensolver keep count must lie in [1, max_basis)");
  if (max_restarts < 1) out.push_back("eigensolver needs at least one restart cycle");
  return out;
}

void normalize_mode_sign(Eigen::VectorXd& v) {
  const double cutoff = 1e-6 * v.cwiseAbs().maxCoeff();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > cutoff) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

double rayleigh_residual(const AnalysisModel& model, const ElementScaling& scaling, const StressField& sigma,
                         double lambda, const Eigen::VectorXd& v) {
  const Eigen::VectorXd kv = stiffness_matvec(model, scaling, v);
  const Eigen::VectorXd gv = geometric_matvec(model, sigma, v);
  const double denom = kv.norm();
  if (denom == 0.0) throw InvalidArgument("rayleigh_residual: mode vector is zero");
  return (kv + lambda * gv).norm() / denom;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// K-orthonormal basis V of the search space, with P = K V and W = -Ksigma V.
class KrylovBasis {
 public:
  KrylovBasis(Index n, int capacity) : v_(n, capacity), p_(n, capacity), w_(n, capacity) {}

  int size() const noexcept { return size_; }
  auto vectors() const { return v_.leftCols(size_); }
  auto k_images() const { return p_.leftCols(size_); }
  auto b_images() const { return w_.leftCols(size_); }
  auto last_b_image() const { return w_.col(size_ - 1); }

  // Removes the span of V from x in the K inner product (two passes).
  // Returns the K-norm of what is left.
  double orthogonalize(Eigen::VectorXd& x, Eigen::VectorXd& kx) const {
    for (int pass = 0; pass < 2 && size_ > 0; ++pass) {
      const Eigen::VectorXd h = p_.leftCols(size_).transpose() * x;
      x.noalias() -= v_.leftCols(size_) * h;
      kx.noalias() -= p_.leftCols(size_) * h;
    }
    return std::sqrt(std::max(0.0, x.dot(kx)));
  }

  void append(const Eigen::VectorXd& x, const Eigen::VectorXd& kx, const Eigen::VectorXd& bx) {
    v_.col(size_) = x;
    p_.col(size_) = kx;
    w_.col(size_) = bx;
    ++size_;
  }

  // Replaces the basis by V S (S has K-orthonormal columns in coefficient space).
  void compress(const Eigen::MatrixXd& s) {
    const int k = static_cast<int>(s.cols());
    const Eigen::MatrixXd nv = v_.leftCols(size_) * s;
    const Eigen::MatrixXd np = p_.leftCols(size_) * s;
    const Eigen::MatrixXd nw = w_.leftCols(size_) * s;
    v_.leftCols(k) = nv;
    p_.leftCols(k) = np;
    w_.leftCols(k) = nw;
    size_ = k;
  }

 private:
  Eigen::MatrixXd v_, p_, w_;
  int size_ = 0;
};

Eigen::VectorXd seeded_vector(const VoxelMesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd x(mesh.dof_count());
  for (Index i = 0; i < x.size(); ++i) x[i] = uni(rng);
  for (Index dof : mesh.fixed_dofs()) x[dof] = 0.0;
  return x;
}

}  // namespace

BucklingSolution solve_buckling(StiffnessSolver& solver, const StressField& sigma, const EigenConfig& config) {
  if (auto p = config.problems(); !p.empty()) throw InvalidArgument(p.front());
  const auto& model = solver.model();
  const auto& scaling = solver.scaling();
  const auto& mesh = model.mesh();
  const Index n = mesh.dof_count();
  const Index n_free = n - static_cast<Index>(mesh.fixed_dofs().size());
  if (n_free == 0) throw InvalidArgument("buckling: every DOF is constrained");
  const int capacity = static_cast<int>(std::min<Index>(config.max_basis, n_free)) + 1;
  const std::size_t solves_before = solver.solve_count();

  auto k_apply = [&](const Eigen::VectorXd& x) { return stiffness_matvec(model, scaling, x); };
  auto b_apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -geometric_matvec(model, sigma, x); };

  std::mt19937_64 rng(config.seed);
  KrylovBasis basis(n, capacity);

  // Adds x to the basis after K-orthogonalisation; false if x lies in span(V).
  auto try_append = [&](Eigen::VectorXd x) {
    Eigen::VectorXd kx = k_apply(x);
    const double before = std::sqrt(std::max(0.0, x.dot(kx)));
    double norm = 0.0;
    // The K image is recomputed after projection: the updated one drifts, and
    // dividing by a small remainder would push that drift into the basis.
    for (int round = 0; round < 2; ++round) {
      basis.orthogonalize(x, kx);
      kx = k_apply(x);
      norm = std::sqrt(std::max(0.0, x.dot(kx)));
      if (norm > 0.5 * before) break;
    }
    if (!(norm > 1e-8 * before) || norm == 0.0) return false;
    x /= norm;
    kx /= norm;
    basis.append(x, kx, b_apply(x));
    return true;
  };

  // Two start vectors so that a repeated leading eigenvalue shows up as a
  // pair of Ritz values instead of a single one.
  if (!try_append(seeded_vector(mesh, rng))) throw InvalidArgument("buckling: degenerate start vector");
  if (n_free > 1) try_append(seeded_vector(mesh, rng));

  BucklingSolution out;
  const int max_cycles = config.max_restarts * config.max_basis;
  bool exhausted = false;
  double best_res = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    // Rayleigh-Ritz on the current basis.
    const int m = basis.size();
    const Eigen::MatrixXd h = basis.vectors().transpose() * basis.b_images();
    const Eigen::MatrixXd hs = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(hs);
    const Eigen::VectorXd theta = ritz.eigenvalues();  // ascending
    const double theta_max = theta[m - 1];
    const double theta_scale = theta.cwiseAbs().maxCoeff();
    const Eigen::VectorXd s1 = ritz.eigenvectors().col(m - 1);
    const Eigen::VectorXd ky = basis.k_images() * s1;
    const Eigen::VectorXd by = basis.b_images() * s1;
    const double ky_norm = ky.norm();

    const bool positive = theta_max > 1e-10 * theta_scale && theta_max > 0.0;
    // Eigen-residual of the candidate pair: for positive theta in the load
    // factor form, otherwise in the shifted-operator form.
    const double res = positive ? (ky - by / theta_max).norm() / ky_norm
                                : (by - theta_max * ky).norm() /
                                      std::max(theta_scale * ky_norm, std::numeric_limits<double>::min());
    const bool can_grow = basis.size() < n_free;
    if (res < 0.9 * best_res) {
      best_res = res;
      stalled = 0;
    } else if (++stalled > 2 * config.max_basis) {
      // A non-positive leading value that stops improving sits on the
      // near-null cluster of -Ksigma; nothing positive has appeared.
      if (!positive) {
        out.status = BucklingStatus::no_buckling;
        out.solves = static_cast<int>(solver.solve_count() - solves_before);
        warn("buckling: no positive load factor found (residual " + sci(best_res) + " at stagnation)");
        return out;
      }
      throw SolverError("buckling eigensolver stagnated at residual " + sci(best_res) + " above eig_tol",
                        best_res, static_cast<int>(solver.solve_count() - solves_before));
    }
    if (res <= config.tol || exhausted || !can_grow) {
      if (!positive) {
        out.status = BucklingStatus::no_buckling;
        out.solves = static_cast<int>(solver.solve_count() - solves_before);
        warn("buckling: no positive load factor (no element in compression drives instability)");
        return out;
      }
      Eigen::VectorXd v = basis.vectors() * s1;
      const Eigen::VectorXd kv = k_apply(v);
      const Eigen::VectorXd gv = geometric_matvec(model, sigma, v);
      const double vkv = v.dot(kv);
      const double lambda = vkv / (-v.dot(gv));
      const double true_res = (kv + lambda * gv).norm() / kv.norm();
      if (true_res <= config.tol || exhausted || !can_grow) {
        v /= std::sqrt(vkv);
        normalize_mode_sign(v);
        out.status = BucklingStatus::converged;
        out.lambda = lambda;
        out.residual = rayleigh_residual(model, scaling, sigma, lambda, v);
        out.mode = std::move(v);
        out.multiplicity_gap = std::numeric_limits<double>::infinity();
        if (m >= 2 && theta[m - 2] > 1e-10 * theta_scale) out.multiplicity_gap = theta_max / theta[m - 2] - 1.0;
        out.solves = static_cast<int>(solver.solve_count() - solves_before);
        if (out.residual > config.tol)
          throw SolverError("buckling eigensolver did not reach tolerance; residual " + sci(out.residual),
                            out.residual, out.solves);
        if (out.multiplicity_gap < config.gap_warning)
          warn("buckling: nearly repeated load factor (relative gap " + std::to_string(out.multiplicity_gap) +
               "); sensitivities assume a simple eigenvalue");
        return out;
      }
    }

    // Block Lanczos step: expand with the shifted-inverse images of the two
    // newest basis vectors (after a restart, the two leading Ritz vectors).
    const int lead = std::min(2, m);
    std::vector<Eigen::VectorXd> images;
    for (int c = 0; c < lead; ++c) images.push_back(solver.solve(Eigen::VectorXd(basis.b_images() * ritz.eigenvectors().col(m - 1 - c))));
    if (basis.size() + lead >= capacity) basis.compress(ritz.eigenvectors().rightCols(std::min(config.keep, m)));
    int added = 0;
    for (auto& z : images)
      if (basis.size() + 1 < capacity && try_append(std::move(z))) ++added;
    if (added == 0) {
      // Invariant subspace: the Ritz values are exact. Widen with a fresh
      // random direction, or accept if the space is exhausted.
      for (int attempt = 0; attempt < 4 && added == 0; ++attempt)
        if (try_append(seeded_vector(mesh, rng))) ++added;
      if (added == 0) exhausted = true;
    }
  }
  throw SolverError("buckling eigensolver exceeded its restart budget", std::numeric_limits<double>::infinity(),
                    static_cast<int>(solver.solve_count() - solves_before));
}

}  // namespace tobuck
