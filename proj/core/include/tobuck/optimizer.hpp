#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tobuck/buckling.hpp"
#include "tobuck/linear_solver.hpp"
#include "tobuck/model.hpp"
#include "tobuck/sensitivity.hpp"

namespace tobuck {

/// Two constraints: g1 on compliance, g2 on the buckling load factor.
inline constexpr int kConstraintCount = 2;
using ConstraintVector = std::array<double, kConstraintCount>;

struct ALParams {
  double mu0 = 1.0;
  double gamma0 = 10.0;
  double varsigma = 0.25;  ///< penalty keeps its value while violation shrinks by this factor
  double eta = 10.0;       ///< penalty growth factor
};

struct ALState {
  ConstraintVector mu{1.0, 1.0};
  ConstraintVector gamma{10.0, 10.0};
  int iteration = 0;
  ConstraintVector g_prev{0.0, 0.0};

  static ALState initial(const ALParams& params);
};

struct ScheduleState {
  double v_current = 1.0;
  double dv = 0.025;
  double v_target = 0.0;
  double J0 = 0.0;
  double P0 = 0.0;
  std::optional<double> a1;  ///< J <= a1 J0 (disabled when empty)
  std::optional<double> a2;  ///< P >= a2 P0 (disabled when empty)
};

/// g1 = J / (a1 J0) - 1 and g2 = 1 - P / (a2 P0); feasible when <= 0.
/// A disabled constraint reports -1.
ConstraintVector constraint_values(double J, double P, const ScheduleState& schedule);

/// Per-constraint term of the augmented Lagrangian.
double auxiliary_lagrangian(double g, double mu, double gamma);

/// max(mu + gamma g, 0): the weight of g' in the Lagrangian gradient.
double constraint_weight(double g, double mu, double gamma);

/// L'_e = -1 + sum_i weight_i * g_i'(e), where g_i' is the removal-direction
/// topological sensitivity of g_i (the increase of g_i when element e is
/// taken out). `dJ` and `dP` are presence derivatives of J and of lambda.
SensitivityField lagrangian_gradient_field(const SensitivityField& dJ, const SensitivityField& dP,
                                           const ConstraintVector& g, const ALState& al,
                                           const ScheduleState& schedule);

/// mu <- max(mu + gamma g, 0).
ALState update_multipliers(ALState al, const ConstraintVector& g);

/// gamma keeps its value when min(g_new, 0) <= varsigma min(g_old, 0), otherwise
/// becomes max(eta gamma, k^2) with k = al.iteration.
ALState update_penalties(ALState al, const ConstraintVector& g_new, const ConstraintVector& g_old,
                         const ALParams& params = {});

/// Keeps the elements with the largest field values plus the non-design
/// mask so that the volume fraction is within 0.5/N of `target_v`. Equal
/// values are ordered by ascending element index.
DesignField level_set_cut(const SensitivityField& field, double target_v, const std::vector<std::uint8_t>& non_design_mask);

struct OptimizationSettings {
  std::optional<double> a1;
  std::optional<double> a2;
  double v_target = 0.0;
  double dv0 = 0.025;
  double dv_max = 0.05;
  double dv_min = 1e-4;
  double filter_radius = 0.0;
  int max_inner_steps = 50;
  double change_tol = 0.005;
  int stable_steps = 2;
  SolverConfig solver;
  EigenConfig eigen;
  ALParams al;

  std::vector<std::string> problems() const;
};

struct OptimizationProblem {
  AnalysisModel model;
  OptimizationSettings settings;
};

/// Static + buckling + sensitivity results for one topology.
struct DesignAnalysis {
  StaticState state;
  BucklingSolution buckling;
  SensitivityField dJ;
  SensitivityField dP;
  std::size_t linear_solves = 0;
};

DesignAnalysis analyze_design(const AnalysisModel& model, const DesignField& design, const OptimizationSettings& settings,
                              bool with_sensitivities);

struct StepMetrics {
  double volume = 0.0;
  double J = 0.0;
  double P = 0.0;
  double J_ratio = 0.0;
  double P_ratio = 0.0;
  ConstraintVector g{};
  double changed_fraction = 0.0;
};

struct StepResult {
  DesignField next;
  StepMetrics metrics;  ///< of the analysed (input) design
  DesignAnalysis analysis;
  SensitivityField field;  ///< filtered field the cut was taken on
};

/// One analyse / sensitivity / combine / filter / cut pass at fixed target volume.
StepResult fixed_point_step(const OptimizationProblem& problem, const DesignField& design, double target_v,
                            const ALState& al, const ScheduleState& schedule);

struct HistoryRow {
  int iter = 0;
  double v = 1.0;
  double J_over_J0 = 1.0;
  double P_over_P0 = 1.0;
  double lambda = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  int inner_steps = 0;
  double wall_s = 0.0;
};

enum class Termination { reached_target, constraint_limit, no_convergence };
std::string_view to_string(Termination t);

struct OptimizationResult {
  std::vector<HistoryRow> history;
  DesignField design;  ///< last accepted topology
  DesignAnalysis analysis;
  Termination termination = Termination::reached_target;
  int rejected_steps = 0;
};

/// Called after every accepted outer iteration (including the full domain).
using AcceptObserver = std::function<void(const HistoryRow&, const DesignField&, const DesignAnalysis&)>;

/// Volume-decrement outer loop around the fixed-point iteration.
OptimizationResult run_optimization(const OptimizationProblem& problem, const AcceptObserver& observer = {});

}  // namespace tobuck
