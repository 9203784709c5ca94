// Serial reference vs OpenMP path for each parallel kernel. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include "modsensor/circuit.hpp"
#include "modsensor/estimation.hpp"
#include "modsensor/fisher.hpp"
#include "modsensor/pulses.hpp"
#include "modsensor/states.hpp"

using namespace modsensor;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_ProbabilityGridMonteCarlo(benchmark::State& state) {
  static const StateVector grid = make_grid_state(GridSpec{0.41});
  ProbGridConfig cfg;
  cfg.a_steps = 9;
  cfg.b_steps = 9;
  cfg.shots = 200;
  cfg.seed = 11;
  for (auto _ : state) {
    benchmark::DoNotOptimize(probability_grid(grid, SensorFamily::grid_family(), cfg, exec_of(state)));
  }
  label(state);
}

void BM_RunBatch(benchmark::State& state) {
  BatchConfig cfg;
  cfg.estimation.iterations = 64;
  cfg.estimation.mode = ScheduleMode::adaptive;
  cfg.estimation.decay = DecayModel::uniform(0.8);
  cfg.estimation.sampler = ModelSampler{cfg.estimation.decay};
  cfg.trials = 64;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(cfg, exec_of(state)));
  label(state);
}

void BM_FimFromGrid(benchmark::State& state) {
  ProbGridConfig cfg;
  cfg.a_min = 0.0;
  cfg.a_max = 1.4;
  cfg.a_steps = 121;
  cfg.b_min = 0.0;
  cfg.b_max = 1.4;
  cfg.b_steps = 121;
  const ProbGrid grid = sample_grid(analytic_grid(SensorFamily::grid_family(), {0.8, 0.8, 0.64}, cfg), 1000, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fim_from_grid(grid, exec_of(state)));
  label(state);
}

void BM_TuneZeta2(benchmark::State& state) {
  PulseSpec spec;
  spec.periods = 40;
  for (auto _ : state) benchmark::DoNotOptimize(tune_zeta2(spec, 10, 16, 0.0, 0.3, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_ProbabilityGridMonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FimFromGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TuneZeta2)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
