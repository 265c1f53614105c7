#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "swavg/chain.hpp"
#include "swavg/montecarlo.hpp"
#include "swavg/perturbation.hpp"
#include "swavg/system.hpp"

namespace {

using namespace swavg;

chain::GeneratorMatrix two_state() {
  Eigen::VectorXd q(2);
  q << 1.0, 2.0;
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  return chain::build_generator(q, p);
}

chain::GeneratorMatrix ring(int n) {
  Eigen::VectorXd q = Eigen::VectorXd::Constant(n, 1.0);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    p(i, (i + 1) % n) += 0.7;
    p(i, (i + n - 1) % n) += 0.3;  // n == 2: both land on the single neighbor
  }
  return chain::build_generator(q, p);
}

void bm_chain_analyze(benchmark::State& state) {
  const auto g = ring(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(chain::analyze(g));
}
BENCHMARK(bm_chain_analyze)->Arg(2)->Arg(8)->Arg(32);

void bm_simulate_chain(benchmark::State& state) {
  const auto g = two_state();
  const double eps = 1.0 / static_cast<double>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        chain::simulate_chain(g, 1.0, eps, 0, RngStream::substream(1, 2, seed++)));
}
BENCHMARK(bm_simulate_chain)->Arg(10)->Arg(100)->Arg(1000);

void bm_integrate_switched(benchmark::State& state) {
  const auto g = two_state();
  const auto field = system::make_linear_field(Eigen::Vector2d(3.0, -3.0).eval(),
                                               Eigen::Vector2d(0.0, 0.0).eval());
  const double eps = 1.0 / static_cast<double>(state.range(0));
  const auto jumps = chain::simulate_chain(g, 1.0, eps, 0, RngStream::substream(3, 4, 5));
  const Eigen::VectorXd u0 = Eigen::VectorXd::Constant(1, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(system::integrate_switched(*field, jumps, u0, 1e-3));
}
BENCHMARK(bm_integrate_switched)->Arg(10)->Arg(100)->Arg(1000);

void bm_residual_check(benchmark::State& state) {
  const auto g = ring(static_cast<int>(state.range(0)));
  const int n = g.size();
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) a[i] = (i % 2 == 0) ? 3.0 : -3.0;
  const auto field = system::make_linear_field(a, Eigen::VectorXd::Zero(n).eval());
  const auto phi = perturbation::make_polynomial({0.0, 1.0, 0.5});
  const auto analysis = chain::analyze(g);
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(-10.0 + 0.1 * i);
  for (auto _ : state)
    benchmark::DoNotOptimize(perturbation::residual_check(*phi, 0.01, g, *field, analysis, grid));
}
BENCHMARK(bm_residual_check)->Arg(2)->Arg(8);

void bm_deviation_study(benchmark::State& state) {
  montecarlo::ExperimentSpec spec;
  spec.generator = two_state();
  spec.field = system::make_linear_field(Eigen::Vector2d(3.0, -3.0).eval(),
                                         Eigen::Vector2d(0.0, 0.0).eval());
  spec.u0 = Eigen::VectorXd::Constant(1, 1.0);
  spec.epsilons = {0.01};
  spec.paths = static_cast<int>(state.range(0));
  spec.deviation_thresholds = {0.05};
  spec.containment_levels = {10.0};
  spec.seed = 11;
  for (auto _ : state) benchmark::DoNotOptimize(montecarlo::run_deviation_study(spec));
}
BENCHMARK(bm_deviation_study)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
