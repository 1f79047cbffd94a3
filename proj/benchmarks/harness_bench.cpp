#include <benchmark/benchmark.h>

#include "mscs/sim/harness.hpp"

using namespace mscs;

namespace {

void BM_ReferenceRun(benchmark::State& state) {
    auto cfg = sim::reference_scenario(1);
    cfg.duration_ms = Millis(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sim::run(cfg).log.size());
}
BENCHMARK(BM_ReferenceRun)->Arg(30000)->Arg(300000)->Unit(benchmark::kMillisecond);

void BM_FloodRun(benchmark::State& state) {
    // the maneuver flood stresses per-message processing cost
    auto cfg = sim::reference_scenario(1, {AttackSpec{AttackId::A7, LongTermId{6}, {}}});
    cfg.duration_ms = 30000;
    for (auto _ : state) benchmark::DoNotOptimize(sim::run(cfg).log.size());
}
BENCHMARK(BM_FloodRun)->Unit(benchmark::kMillisecond);

}  // namespace
