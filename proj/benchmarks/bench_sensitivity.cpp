// Direct vs adjoint buckling sensitivity and the operator kernels on
// clamped brick columns of increasing size.

#include <benchmark/benchmark.h>

#include "tobuck/buckling.hpp"
#include "tobuck/operators.hpp"
#include "tobuck/sensitivity.hpp"

using namespace tobuck;

namespace {

// Column of n x n x 5n bricks (h = 10 mm), clamped at z-min, end pressure and
// 150 degC heating. The cross-section is slightly rectangular so the
// leading load factor is simple.
AnalysisModel column(int n) {
  GridSpec g{{n, n, 5 * n}, {0.01, 0.012, 0.01}, 1.0};
  LoadCase loads;
  loads.delta_t = 150.0;
  loads.face_pressures.push_back({FaceSelector::parse("z-max"), -5e7, {0.0, 0.0, 1.0}});
  const std::vector<Support> sup{{FaceSelector::parse("z-min"), {Axis::x, Axis::y, Axis::z}}};
  return AnalysisModel(build_grid(g, {2e11, 0.3, 1.1e-5}, loads, sup, {false, false}));
}

struct Fixture {
  AnalysisModel model;
  ElementScaling scaling;
  StiffnessSolver solver;
  StaticState state;
  BucklingSolution buckling;

  explicit Fixture(int n)
      : model(column(n)),
        scaling(scaling_for(full_design(model.mesh().element_count()), 1e-6)),
        solver(model, scaling, {1e-8, 20000, 1e-6, LinearSolverKind::cholesky}) {
    EigenConfig ec;
    ec.tol = 1e-6;
    state = solve_static(solver);
    buckling = solve_buckling(solver, state.sigma, ec);
  }
};

void BM_adjoint(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lambda_sensitivity_adjoint(f.solver, f.state, f.buckling));
  st.counters["elements"] = static_cast<double>(f.model.mesh().element_count());
}

void BM_direct(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lambda_sensitivity_direct(f.solver, f.state, f.buckling));
  st.counters["elements"] = static_cast<double>(f.model.mesh().element_count());
}

void BM_stiffness_matvec(benchmark::State& st) {
  const AnalysisModel m = column(static_cast<int>(st.range(0)));
  const ElementScaling s = scaling_for(full_design(m.mesh().element_count()), 1e-6);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(m.mesh().dof_count());
  for (auto _ : st) benchmark::DoNotOptimize(stiffness_matvec(m, s, x));
  st.SetItemsProcessed(st.iterations() * m.mesh().element_count());
}

void BM_geometric_matvec(benchmark::State& st) {
  const AnalysisModel m = column(static_cast<int>(st.range(0)));
  const StressField sigma = StressField::Constant(6, m.mesh().element_count(), -1e8);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(m.mesh().dof_count());
  for (auto _ : st) benchmark::DoNotOptimize(geometric_matvec(m, sigma, x));
  st.SetItemsProcessed(st.iterations() * m.mesh().element_count());
}

}  // namespace

BENCHMARK(BM_adjoint)->Arg(2)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_direct)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_stiffness_matvec)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_geometric_matvec)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
