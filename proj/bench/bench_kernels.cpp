// Serial reference against the OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "lpest/resolvent.hpp"
#include "lpest/sde.hpp"

namespace {

using namespace lpest;

SimConfig exit_config(std::size_t paths) {
  OperatorSpec lap{families::laplacian(2), 1.0, 0.0};
  SimConfig c = config_from_operator(lap, Domain::ball(2, 1.0), 1e-3, paths, 7);
  c.functionals.push_back({"one", [](double, Vec2) { return 1.0; }, 0.0});
  return c;
}

void BM_paths_serial(benchmark::State& state) {
  const SimConfig c = exit_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_paths_serial(c).paths.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_paths_parallel(benchmark::State& state) {
  const SimConfig c = exit_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_paths(c).paths.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct BankSetup {
  OperatorSpec spec{families::sign_drift(3.0), 1.0, 1.0, OperatorClass::kTraceBounded};
  std::shared_ptr<const Grid> grid;
  std::vector<BankMember> bank;

  explicit BankSetup(double mu) {
    const auto d = suggest_discretization(mu, 3.0);
    grid = classify_boundary(Domain::ball(1, d.radius), GridSpec{1, 1, d.h, 0.0});
    bank = make_test_bank(grid->domain(), d.width);
  }
};

void BM_bank_serial(benchmark::State& state) {
  const BankSetup s(4.0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_operator_norm_serial(s.spec, 4.0, 1.0, s.grid, s.bank).value);
}

void BM_bank_parallel(benchmark::State& state) {
  const BankSetup s(4.0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_operator_norm(s.spec, 4.0, 1.0, s.grid, s.bank).value);
}

}  // namespace

BENCHMARK(BM_paths_serial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_paths_parallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bank_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bank_parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
