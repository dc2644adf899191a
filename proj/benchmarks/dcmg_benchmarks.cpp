#include <benchmark/benchmark.h>

#include "dcmg/crb.hpp"
#include "dcmg/estimator.hpp"
#include "dcmg/experiment.hpp"
#include "dcmg/grid_model.hpp"
#include "dcmg/measurement.hpp"
#include "dcmg/training_protocol.hpp"

namespace {

using namespace dcmg;

constexpr std::size_t kController = 4;

void BM_SolveBusVoltage(benchmark::State& state) {
  const auto config = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, config.rated_voltage);
  const auto refs = plan.reference_voltages(3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_bus_voltage(config, refs));
}
BENCHMARK(BM_SolveBusVoltage);

void BM_EstimateTrial(benchmark::State& state) {
  const auto config = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, config.rated_voltage);
  const auto trace = simulate_training(config, plan);
  const NoiseModel noise;
  const double own = config.capacities[kController];
  std::uint64_t trial = 0;
  for (auto _ : state) {
    const auto m = observe(trace, kController, noise, stream_seed(1, trial++, kController));
    benchmark::DoNotOptimize(
        solve_mle(assemble_full(m, plan, own, config.rated_voltage, config.min_voltage)));
    benchmark::DoNotOptimize(solve_mle(
        assemble_transformed(m, plan, own, config.rated_voltage, config.min_voltage, m.nominal)));
  }
}
BENCHMARK(BM_EstimateTrial);

void BM_CrbTransformed(benchmark::State& state) {
  const auto config = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, config.rated_voltage);
  for (auto _ : state) {
    const auto rec = sensitivities(config, plan, kController);
    benchmark::DoNotOptimize(crb_transformed(rec, 2e-7));
  }
}
BENCHMARK(BM_CrbTransformed);

void BM_SweepGridPoint(benchmark::State& state) {
  ExperimentSpec spec;
  spec.deltas = {0.005};
  spec.trials = static_cast<std::size_t>(state.range(0));
  spec.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SweepGridPoint)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
