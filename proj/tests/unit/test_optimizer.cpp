#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "models.hpp"
#include "tobuck/config.hpp"
#include "tobuck/diagnostics.hpp"
#include "tobuck/optimizer.hpp"

using namespace tobuck;

namespace {

ScheduleState schedule(std::optional<double> a1, std::optional<double> a2, double J0 = 1.0, double P0 = 1.0) {
  ScheduleState s;
  s.a1 = a1;
  s.a2 = a2;
  s.J0 = J0;
  s.P0 = P0;
  return s;
}

SensitivityField field(std::vector<double> v) { return {std::move(v), SensitivityKind::combined, false}; }

std::vector<int> kept(const DesignField& d) {
  std::vector<int> out;
  for (Index e = 0; e < d.size(); ++e)
    if (d.present(e)) out.push_back(static_cast<int>(e));
  return out;
}

OptimizationProblem small_problem(double v_target) {
  ProblemSpec spec = parse_problem_config(std::filesystem::path(TOBUCK_FIXTURE_DIR) / "column_small.json");
  spec.constraints.v_target = v_target;
  return build_problem(spec);
}

}  // namespace

TEST_CASE("constraint values") {
  const auto s = schedule(2.5, 0.6, 4.0, 0.5);
  auto g = constraint_values(2.5 * 4.0, 0.91 * 0.5, s);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(1.0 - 0.91 / 0.6).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(-0.5166666666666667));
  g = constraint_values(4.0, 0.5 * 0.6 * 0.5, s);
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto only_j = schedule(2.0, std::nullopt, 1.0, 1.0);
  CHECK(constraint_values(1.0, 123.0, only_j)[1] == -1.0);
  CHECK_THROWS(constraint_values(1.0, 1.0, schedule(2.0, 0.5, 0.0, 1.0)));
  CHECK_THROWS(constraint_values(1.0, 1.0, schedule(2.0, 0.5, 1.0, -1.0)));
}

TEST_CASE("auxiliary Lagrangian branches") {
  CHECK(auxiliary_lagrangian(0.0, 1.0, 10.0) == 0.0);
  CHECK(auxiliary_lagrangian(0.5, 1.0, 10.0) == 1.75);
  CHECK(auxiliary_lagrangian(-0.5, 1.0, 10.0) == -0.05);
  CHECK(constraint_weight(-0.5, 1.0, 10.0) == 0.0);
  CHECK(constraint_weight(0.5, 1.0, 10.0) == 6.0);
}

TEST_CASE("Lagrangian gradient field") {
  SUBCASE("deep-feasible constraints leave the volume term") {
    ALState al = ALState::initial({});
    const auto s = schedule(2.0, 0.5, 5.0, 2.0);
    const auto out = lagrangian_gradient_field(field({-1, -2, -3}), field({0.5, 0.1, -0.2}), {-0.5, -0.5}, al, s);
    CHECK(out.values == std::vector<double>{-1, -1, -1});
    CHECK(out.kind == SensitivityKind::combined);
  }
  SUBCASE("one active constraint") {
    ALState al = ALState::initial({});
    const auto s = schedule(2.0, std::nullopt, 5.0, 1.0);
    // mu + gamma g = 1 + 10 * 0.1 = 2; g' = -dJ / (a1 J0) = 0.3
    const auto out = lagrangian_gradient_field(field({-3.0}), field({0.0}), {0.1, -1.0}, al, s);
    CHECK(out.values[0] == doctest::Approx(-0.4).epsilon(1e-15));
    // exactly representable variant: weight 2, g' = 0.25
    const auto exact = lagrangian_gradient_field(field({-2.5}), field({0.0}), {0.1, -1.0}, al, s);
    CHECK(exact.values[0] == -0.5);
  }
  SUBCASE("buckling term enters with the opposite sign") {
    ALState al = ALState::initial({});
    const auto s = schedule(std::nullopt, 0.5, 1.0, 4.0);
    // g2' = +dP / (a2 P0) = 0.5 for dP = 1
    const auto out = lagrangian_gradient_field(field({0.0}), field({1.0}), {-1.0, 0.1}, al, s);
    CHECK(out.values[0] == 0.0);
  }
  SUBCASE("doubling gamma doubles the constraint term") {
    ALState al = ALState::initial({});
    al.mu = {0.0, 0.0};
    const auto s = schedule(1.0, std::nullopt, 1.0, 1.0);
    const auto a = lagrangian_gradient_field(field({-0.75, -0.25}), field({0, 0}), {0.5, -1}, al, s);
    al.gamma[0] *= 2;
    const auto b = lagrangian_gradient_field(field({-0.75, -0.25}), field({0, 0}), {0.5, -1}, al, s);
    for (int e = 0; e < 2; ++e) CHECK(b.values[e] + 1.0 == 2.0 * (a.values[e] + 1.0));
  }
}

TEST_CASE("multiplier update") {
  ALState al = ALState::initial({});
  CHECK(update_multipliers(al, {0.5, -0.2}).mu == ConstraintVector{6.0, 0.0});
  al.mu = {0.0, 0.0};
  CHECK(update_multipliers(al, {0.0, 0.0}).mu == ConstraintVector{0.0, 0.0});
}

TEST_CASE("penalty update") {
  ALState al = ALState::initial({});
  al.iteration = 2;
  CHECK(update_penalties(al, {-0.5, 0.0}, {-1.0, 0.0}).gamma == ConstraintVector{10.0, 10.0});
  CHECK(update_penalties(al, {-0.1, -0.5}, {-1.0, -1.0}).gamma == ConstraintVector{100.0, 10.0});
  al.iteration = 40;
  CHECK(update_penalties(al, {-0.1, 0}, {-1.0, 0}).gamma == ConstraintVector{1600.0, 10.0});
  CHECK(ALState::initial({}).mu == ConstraintVector{1.0, 1.0});
  CHECK(ALState::initial({}).gamma == ConstraintVector{10.0, 10.0});
}

TEST_CASE("level-set cut") {
  SUBCASE("order statistics") {
    const DesignField d = level_set_cut(field({3, 1, 2, 4}), 0.5, {});
    CHECK(kept(d) == std::vector<int>{0, 3});
    CHECK(d.tau > 2.0);
    CHECK(d.tau < 3.0);
  }
  SUBCASE("full target keeps everything") {
    const DesignField d = level_set_cut(field({3, 1, 2, 4}), 1.0, {});
    CHECK(kept(d).size() == 4);
    CHECK(d.tau < 1.0);
  }
  SUBCASE("ties are broken by ascending index") {
    CHECK(kept(level_set_cut(field({1, 1, 1, 1}), 0.5, {})) == std::vector<int>{0, 1});
    CHECK(kept(level_set_cut(field({0, 5, 5, 5, 5, 0}), 0.5, {})) == std::vector<int>{1, 2, 3});
  }
  SUBCASE("presence agrees with tau and the mask") {
    std::vector<double> v(50);
    for (int i = 0; i < 50; ++i) v[i] = std::sin(1.7 * i);
    std::vector<std::uint8_t> mask(50, 0);
    mask[3] = mask[17] = 1;
    const DesignField d = level_set_cut(field(v), 0.4, mask);
    CHECK(kept(d).size() == 20);
    for (int e = 0; e < 50; ++e) CHECK(d.present(e) == (v[e] > d.tau || mask[e]));
  }
  SUBCASE("shift and permutation invariance") {
    std::vector<double> v(40);
    for (int i = 0; i < 40; ++i) v[i] = std::cos(0.37 * i * i);
    const auto base = kept(level_set_cut(field(v), 0.35, {}));
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 123.0;
    CHECK(kept(level_set_cut(field(shifted), 0.35, {})) == base);

    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 7, perm.end());
    std::vector<double> pv(40);
    for (int i = 0; i < 40; ++i) pv[i] = v[perm[i]];
    const DesignField pd = level_set_cut(field(pv), 0.35, {});
    std::vector<int> back;
    for (int i = 0; i < 40; ++i)
      if (pd.present(i)) back.push_back(perm[i]);
    std::sort(back.begin(), back.end());
    CHECK(back == base);
  }
  SUBCASE("volume within half an element") {
    std::vector<double> v(37);
    for (int i = 0; i < 37; ++i) v[i] = (i * 13) % 37;
    for (double t : {0.1, 0.33, 0.5, 0.77, 0.99}) {
      const DesignField d = level_set_cut(field(v), t, {});
      CHECK(std::abs(volume_fraction(d) - t) <= 0.5 / 37 + 1e-12);
    }
  }
  SUBCASE("mask larger than the target") {
    std::vector<std::uint8_t> mask{1, 1, 1, 0};
    try {
      level_set_cut(field({1, 2, 3, 4}), 0.5, mask);
      FAIL("expected an error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("mask") != std::string::npos);
      CHECK(std::string(e.what()).find("0.75") != std::string::npos);
    }
  }
}

TEST_CASE("fixed-point step on the full domain") {
  const OptimizationProblem p = small_problem(0.5);
  const Index n = p.model.mesh().element_count();
  DesignField d = full_design(n, p.model.non_design_mask());
  const DesignAnalysis a = analyze_design(p.model, d, p.settings, false);
  ScheduleState s = schedule(p.settings.a1, p.settings.a2, a.state.compliance, a.buckling.lambda);
  const StepResult r = fixed_point_step(p, d, 0.975, ALState::initial({}), s);
  CHECK(r.metrics.J_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.metrics.P_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.metrics.volume == 1.0);
  CHECK(volume_fraction(r.next) == doctest::Approx(0.975).epsilon(0.5 / n));
  CHECK(r.metrics.changed_fraction == doctest::Approx(0.025).epsilon(1.0 / n));

  // At the target volume the voids stay out, so the step is a fixed point.
  const StepResult again = fixed_point_step(p, r.next, 0.975, ALState::initial({}), s);
  CHECK(again.metrics.changed_fraction == 0.0);
}

TEST_CASE("optimization run invariants") {
  ScopedWarningCapture quiet;
  const OptimizationProblem p = small_problem(0.6);
  std::vector<HistoryRow> seen;
  const OptimizationResult r =
      run_optimization(p, [&](const HistoryRow& row, const DesignField&, const DesignAnalysis&) { seen.push_back(row); });
  REQUIRE(r.history.size() >= 3);
  CHECK(seen.size() == r.history.size());
  const HistoryRow& first = r.history.front();
  CHECK(first.v == 1.0);
  CHECK(first.J_over_J0 == 1.0);
  CHECK(first.P_over_P0 == 1.0);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const HistoryRow& row = r.history[i];
    CHECK(row.iter == static_cast<int>(i));
    CHECK(row.g1 <= 0.0);
    CHECK(row.g2 <= 0.0);
    CHECK(row.mu1 >= 0.0);
    CHECK(row.mu2 >= 0.0);
    if (i > 0) {
      CHECK(row.v < r.history[i - 1].v);
      CHECK(row.gamma1 >= r.history[i - 1].gamma1);
      CHECK(row.gamma2 >= r.history[i - 1].gamma2);
      CHECK(row.inner_steps >= 1);
      CHECK(row.inner_steps <= p.settings.max_inner_steps);
    }
  }
  CHECK(volume_fraction(r.design) == doctest::Approx(r.history.back().v));
  if (r.termination == Termination::reached_target) CHECK(r.history.back().v <= 0.6 + 0.5 / 160);

  // First accepted step removes dv0; growth by 10% afterwards.
  CHECK(r.history[1].v == doctest::Approx(0.975).epsilon(0.5 / 160));
}

TEST_CASE("full-domain target returns one row") {
  const OptimizationProblem p = small_problem(1.0);
  const OptimizationResult r = run_optimization(p);
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].v == 1.0);
  CHECK(r.termination == Termination::reached_target);
}

TEST_CASE("infeasible full domain is reported") {
  ProblemSpec spec = parse_problem_config(std::filesystem::path(TOBUCK_FIXTURE_DIR) / "column_small.json");
  spec.constraints.a1 = 0.5;
  const OptimizationProblem p = build_problem(spec);
  try {
    run_optimization(p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == "infeasible");
  }
}

TEST_CASE("settings validation") {
  OptimizationSettings s;
  s.v_target = 0.5;
  CHECK_FALSE(s.problems().empty());
  s.a1 = 2.0;
  CHECK(s.problems().empty());
  s.v_target = 1.5;
  CHECK_FALSE(s.problems().empty());
}
