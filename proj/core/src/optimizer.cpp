#include "tobuck/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

ALState ALState::initial(const ALParams& p) {
  ALState s;
  s.mu = {p.mu0, p.mu0};
  s.gamma = {p.gamma0, p.gamma0};
  return s;
}

ConstraintVector constraint_values(double J, double P, const ScheduleState& schedule) {
  ConstraintVector g{-1.0, -1.0};
  if (schedule.a1) {
    if (!(schedule.J0 > 0.0) || !(*schedule.a1 > 0.0)) throw InvalidArgument("compliance reference a1*J0 must be positive");
    g[0] = J / (*schedule.a1 * schedule.J0) - 1.0;
  }
  if (schedule.a2) {
    if (!(schedule.P0 > 0.0) || !(*schedule.a2 > 0.0)) throw InvalidArgument("buckling reference a2*P0 must be positive");
    g[1] = 1.0 - P / (*schedule.a2 * schedule.P0);
  }
  return g;
}

double auxiliary_lagrangian(double g, double mu, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("penalty parameter must be positive");
  if (mu + gamma * g > 0.0) return mu * g + 0.5 * gamma * g * g;
  return -mu * mu / (2.0 * gamma);
}

double constraint_weight(double g, double mu, double gamma) { return std::max(mu + gamma * g, 0.0); }

namespace {

// Removal-direction sensitivities of g1 and g2, per element.
std::array<std::vector<double>, kConstraintCount> removal_sensitivities(const SensitivityField& dJ,
                                                                        const SensitivityField& dP,
                                                                        const ScheduleState& schedule) {
  std::array<std::vector<double>, kConstraintCount> t;
  if (schedule.a1) {
    const double scale = 1.0 / (*schedule.a1 * schedule.J0);
    t[0].resize(dJ.values.size());
    std::transform(dJ.values.begin(), dJ.values.end(), t[0].begin(), [&](double v) { return -v * scale; });
  }
  if (schedule.a2) {
    const double scale = 1.0 / (*schedule.a2 * schedule.P0);
    t[1].resize(dP.values.size());
    std::transform(dP.values.begin(), dP.values.end(), t[1].begin(), [&](double v) { return v * scale; });
  }
  return t;
}

}  // namespace

SensitivityField lagrangian_gradient_field(const SensitivityField& dJ, const SensitivityField& dP,
                                           const ConstraintVector& g, const ALState& al,
                                           const ScheduleState& schedule) {
  const auto t = removal_sensitivities(dJ, dP, schedule);
  const std::size_t n = std::max(dJ.values.size(), dP.values.size());
  SensitivityField out;
  out.kind = SensitivityKind::combined;
  out.values.assign(n, -1.0);
  for (int i = 0; i < kConstraintCount; ++i) {
    if (t[i].empty()) continue;
    const double w = constraint_weight(g[i], al.mu[i], al.gamma[i]);
    if (w == 0.0) continue;
    for (std::size_t e = 0; e < n; ++e) out.values[e] += w * t[i][e];
  }
  return out;
}

ALState update_multipliers(ALState al, const ConstraintVector& g) {
  for (int i = 0; i < kConstraintCount; ++i) al.mu[i] = std::max(al.mu[i] + al.gamma[i] * g[i], 0.0);
  return al;
}

ALState update_penalties(ALState al, const ConstraintVector& g_new, const ConstraintVector& g_old,
                         const ALParams& params) {
  const double k = al.iteration;
  for (int i = 0; i < kConstraintCount; ++i) {
    if (std::min(g_new[i], 0.0) <= params.varsigma * std::min(g_old[i], 0.0)) continue;
    al.gamma[i] = std::max(params.eta * al.gamma[i], k * k);
  }
  al.g_prev = g_new;
  return al;
}

namespace {

// Ineligible elements rank below every eligible one; tau is placed between
// eligible values only.
DesignField cut_eligible(const SensitivityField& field, double target_v, const std::vector<std::uint8_t>& mask,
                         const std::vector<std::uint8_t>* eligible) {
  const std::size_t n = field.values.size();
  if (n == 0) throw InvalidArgument("level_set_cut: empty field");
  if (!(target_v > 0.0 && target_v <= 1.0)) throw InvalidArgument("target volume fraction must lie in (0, 1]");
  if (!mask.empty() && mask.size() != n) throw InvalidArgument("level_set_cut: mask size mismatch");

  const auto keep_total = static_cast<std::size_t>(std::llround(target_v * static_cast<double>(n)));
  std::vector<std::size_t> free;
  std::size_t frozen = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (!mask.empty() && mask[e]) ++frozen;
    else free.push_back(e);
  }
  if (frozen > keep_total) {
    std::ostringstream msg;
    msg << "target volume " << target_v << " unreachable: non-design mask alone occupies "
        << static_cast<double>(frozen) / static_cast<double>(n);
    throw InvalidArgument(msg.str());
  }
  auto ok = [&](std::size_t e) { return eligible == nullptr || (*eligible)[e] != 0; };
  std::stable_sort(free.begin(), free.end(), [&](std::size_t a, std::size_t b) {
    if (ok(a) != ok(b)) return ok(a);
    return field.values[a] > field.values[b];
  });
  const std::size_t keep_free = keep_total - frozen;
  const std::size_t ranked = static_cast<std::size_t>(std::count_if(free.begin(), free.end(), ok));

  DesignField out;
  out.values = field.values;
  out.non_design_mask = mask.empty() ? std::vector<std::uint8_t>(n, 0) : mask;
  out.presence.assign(n, 0);
  for (std::size_t e = 0; e < n; ++e)
    if (out.non_design_mask[e]) out.presence[e] = 1;
  for (std::size_t r = 0; r < keep_free; ++r) out.presence[free[r]] = 1;

  const std::size_t last = std::min(keep_free, ranked);
  if (ranked == 0) {
    out.tau = -std::numeric_limits<double>::infinity();
  } else if (last == 0) {
    out.tau = field.values[free.front()];
  } else if (last == ranked) {
    out.tau = std::nextafter(field.values[free[last - 1]], -std::numeric_limits<double>::infinity());
  } else {
    out.tau = 0.5 * (field.values[free[last - 1]] + field.values[free[last]]);
  }
  return out;
}

}  // namespace

DesignField level_set_cut(const SensitivityField& field, double target_v, const std::vector<std::uint8_t>& mask) {
  return cut_eligible(field, target_v, mask, nullptr);
}

std::vector<std::string> OptimizationSettings::problems() const {
  std::vector<std::string> out;
  if (!a1 && !a2) out.push_back("constraints: at least one of a1, a2 must be given");
  if (a1 && !(*a1 > 0.0)) out.push_back("constraints.a1 must be > 0");
  if (a2 && !(*a2 > 0.0)) out.push_back("constraints.a2 must be > 0");
  if (!(v_target > 0.0 && v_target <= 1.0)) out.push_back("constraints.v_target must lie in (0, 1]");
  if (!(dv0 > 0.0 && dv0 < 1.0)) out.push_back("solver.dv0 must lie in (0, 1)");
  if (!(filter_radius >= 0.0)) out.push_back("solver.filter_radius must be >= 0");
  for (auto& p : solver.problems()) out.push_back(p);
  for (auto& p : eigen.problems()) out.push_back(p);
  return out;
}

DesignAnalysis analyze_design(const AnalysisModel& model, const DesignField& design, const OptimizationSettings& settings,
                              bool with_sensitivities) {
  DesignAnalysis a;
  StiffnessSolver solver(model, scaling_for(design, settings.solver.ersatz_eps), settings.solver);
  a.state = solve_static(solver);
  a.buckling = solve_buckling(solver, a.state.sigma, settings.eigen);
  if (!a.buckling.found() && settings.a2)
    throw SolverError("buckling constraint set but the design has no positive load factor", 0.0, 0);
  if (with_sensitivities) {
    a.dJ = compliance_sensitivity(model, a.state);
    if (a.buckling.found()) {
      a.dP = lambda_sensitivity_adjoint(solver, a.state, a.buckling);
    } else {
      a.dP.kind = SensitivityKind::buckling_adjoint;
      a.dP.values.assign(static_cast<std::size_t>(model.mesh().element_count()), 0.0);
    }
  }
  a.linear_solves = solver.solve_count();
  return a;
}

namespace {

double load_factor(const DesignAnalysis& a) {
  return a.buckling.found() ? a.buckling.lambda : std::numeric_limits<double>::infinity();
}

StepMetrics metrics_for(const DesignField& design, const DesignAnalysis& a, const ScheduleState& schedule) {
  StepMetrics m;
  m.volume = volume_fraction(design);
  m.J = a.state.compliance;
  m.P = load_factor(a);
  m.J_ratio = schedule.J0 > 0.0 ? m.J / schedule.J0 : 1.0;
  m.P_ratio = schedule.P0 > 0.0 ? m.P / schedule.P0 : 1.0;
  m.g = constraint_values(m.J, m.P, schedule);
  return m;
}

bool feasible(const ConstraintVector& g) {
  return std::all_of(g.begin(), g.end(), [](double v) { return v <= 0.0; });
}

}  // namespace

StepResult fixed_point_step(const OptimizationProblem& problem, const DesignField& design, double target_v,
                            const ALState& al, const ScheduleState& schedule) {
  const auto& model = problem.model;
  const auto& settings = problem.settings;
  StepResult r;
  r.analysis = analyze_design(model, design, settings, true);
  r.metrics = metrics_for(design, r.analysis, schedule);

  SensitivityField combined = lagrangian_gradient_field(r.analysis.dJ, r.analysis.dP, r.metrics.g, al, schedule);
  const auto [lo, hi] = std::minmax_element(combined.values.begin(), combined.values.end());
  if (*lo == *hi) {
    // Every constraint is in its inactive branch, so the Lagrangian gradient
    // is flat. Rank elements by the plain sum of constraint sensitivities.
    const auto t = removal_sensitivities(r.analysis.dJ, r.analysis.dP, schedule);
    std::fill(combined.values.begin(), combined.values.end(), 0.0);
    for (const auto& ti : t)
      for (std::size_t e = 0; e < ti.size(); ++e) combined.values[e] += ti[e];
  }
  // Void values come from present neighbours through the filter; their own
  // ersatz-state sensitivities are dominated by the soft-element strains.
  r.field = radial_filter(model.mesh(), combined, settings.filter_radius, design.presence);
  // Removal is monotone: when the target does not exceed the present volume,
  // only present elements compete for the cut and voids are never revived.
  // Reviving voids lets one cut swap out a whole cross-section band.
  const auto n = static_cast<std::size_t>(design.size());
  const auto keep = static_cast<std::size_t>(std::llround(target_v * static_cast<double>(n)));
  const auto present = static_cast<std::size_t>(std::count(design.presence.begin(), design.presence.end(), 1));
  r.next = present >= keep ? cut_eligible(r.field, target_v, design.non_design_mask, &design.presence)
                           : level_set_cut(r.field, target_v, design.non_design_mask);

  std::size_t changed = 0;
  for (std::size_t e = 0; e < design.presence.size(); ++e) changed += (design.presence[e] != r.next.presence[e]);
  r.metrics.changed_fraction = static_cast<double>(changed) / static_cast<double>(design.presence.size());
  return r;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::reached_target: return "reached_target";
    case Termination::constraint_limit: return "constraint_limit";
    case Termination::no_convergence: return "no_convergence";
  }
  return "?";
}

OptimizationResult run_optimization(const OptimizationProblem& problem, const AcceptObserver& observer) {
  const auto& model = problem.model;
  const auto& settings = problem.settings;
  if (auto p = settings.problems(); !p.empty()) throw ConfigError(p);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const Index n = model.mesh().element_count();
  DesignField accepted = full_design(n, model.non_design_mask());
  DesignAnalysis accepted_analysis = analyze_design(model, accepted, settings, false);

  ScheduleState schedule;
  schedule.v_target = settings.v_target;
  schedule.dv = settings.dv0;
  schedule.a1 = settings.a1;
  schedule.a2 = settings.a2;
  schedule.J0 = accepted_analysis.state.compliance;
  schedule.P0 = load_factor(accepted_analysis);
  if (settings.a1 && !(schedule.J0 > 0.0)) throw Error("infeasible", "full-domain compliance is not positive");
  if (settings.a2 && !(schedule.P0 > 0.0)) throw Error("infeasible", "full-domain buckling factor is not positive");

  ALState al = ALState::initial(settings.al);
  ConstraintVector g = constraint_values(schedule.J0, schedule.P0, schedule);
  if (!feasible(g)) {
    std::ostringstream msg;
    msg << "constraints violated on the full domain (g1=" << g[0] << ", g2=" << g[1] << ")";
    throw Error("infeasible", msg.str());
  }
  al.g_prev = g;

  OptimizationResult result;
  auto emit = [&](int inner_steps, const StepMetrics& m, double lambda) {
    HistoryRow row;
    row.iter = static_cast<int>(result.history.size());
    row.v = schedule.v_current;
    row.J_over_J0 = m.J_ratio;
    row.P_over_P0 = m.P_ratio;
    row.lambda = lambda;
    row.g1 = m.g[0];
    row.g2 = m.g[1];
    row.mu1 = al.mu[0];
    row.mu2 = al.mu[1];
    row.gamma1 = al.gamma[0];
    row.gamma2 = al.gamma[1];
    row.inner_steps = inner_steps;
    row.wall_s = elapsed();
    result.history.push_back(row);
    if (observer) observer(row, accepted, accepted_analysis);
  };
  emit(0, metrics_for(accepted, accepted_analysis, schedule), load_factor(accepted_analysis));

  result.termination = Termination::reached_target;
  bool last_failure_infeasible = false;
  while (schedule.v_current > settings.v_target + 0.5 / static_cast<double>(n)) {
    // Remove at least one element; a step that rounds to the current count
    // would be accepted unchanged forever.
    const double one_less = (std::round(schedule.v_current * static_cast<double>(n)) - 1.0) / static_cast<double>(n);
    const double target = std::max(std::min(schedule.v_current - schedule.dv, one_less), settings.v_target);
    DesignField design = accepted;
    int stable = 0;
    bool converged = false;
    int steps = 0;
    StepResult step;
    bool solve_failed = false;
    for (steps = 1; steps <= settings.max_inner_steps; ++steps) {
      try {
        step = fixed_point_step(problem, design, target, al, schedule);
      } catch (const SolverError& e) {
        // Typically a cut that left material hanging on ersatz elements only.
        warn(std::string("step to v=") + std::to_string(target) + " hit a solver failure: " + e.what());
        solve_failed = true;
        break;
      }
      const bool at_target = std::abs(step.metrics.volume - target) <= 0.5 / static_cast<double>(n) + 1e-12;
      stable = (at_target && step.metrics.changed_fraction < settings.change_tol) ? stable + 1 : 0;
      if (stable >= settings.stable_steps) {
        converged = true;
        break;
      }
      design = std::move(step.next);
    }

    if (converged && feasible(step.metrics.g)) {
      accepted = design;
      accepted_analysis = std::move(step.analysis);
      schedule.v_current = step.metrics.volume;
      al.iteration += 1;
      const ConstraintVector g_new = step.metrics.g;
      al = update_multipliers(al, g_new);
      al = update_penalties(al, g_new, g, settings.al);
      g = g_new;
      emit(steps, step.metrics, load_factor(accepted_analysis));
      schedule.dv = std::min(1.1 * schedule.dv, settings.dv_max);
      continue;
    }

    ++result.rejected_steps;
    last_failure_infeasible = converged || solve_failed;
    std::ostringstream msg;
    msg << "step to v=" << target;
    if (solve_failed)
      msg << " rejected";
    else
      msg << (converged ? " converged to an infeasible topology" : " did not converge") << " (g1=" << step.metrics.g[0]
          << ", g2=" << step.metrics.g[1] << ")";
    msg << "; halving dv to " << schedule.dv / 2;
    warn(msg.str());
    schedule.dv /= 2.0;
    if (schedule.dv < settings.dv_min) {
      result.termination = last_failure_infeasible ? Termination::constraint_limit : Termination::no_convergence;
      break;
    }
  }
  result.design = std::move(accepted);
  result.analysis = std::move(accepted_analysis);
  return result;
}

}  // namespace tobuck
