#include <benchmark/benchmark.h>

#include "mtsim/cav.hpp"
#include "mtsim/engine.hpp"
#include "mtsim/network.hpp"
#include "mtsim/rng.hpp"
#include "mtsim/signal.hpp"

using namespace mtsim;

namespace {

std::vector<LinkQueueSnapshot> busy_queues(int per_link) {
    std::vector<LinkQueueSnapshot> queues;
    Rng rng(1);
    for (int l = 1; l <= 4; ++l) {
        LinkQueueSnapshot q;
        q.link = l;
        q.phase_index = (l - 1) / 2;
        q.mean_green = 12.0;
        q.ref_speed = 13.89;
        double d = 2.0;
        for (int i = 0; i < per_link; ++i) {
            q.vehicles.push_back({d, rng.uniform(0.0, 6.0), VehicleClass::HDV, i + 1});
            d += rng.uniform(2.5, 12.0);
        }
        queues.push_back(q);
    }
    return queues;
}

IntersectionSpec four_leg() {
    IntersectionSpec spec;
    spec.node = 1;
    spec.clearance_s = 3.0;
    spec.saturation_headway_s = 2.0;
    spec.phases = {{1, 2}, {3, 4}};
    return spec;
}

void BM_OptimizeDischarge(benchmark::State& state) {
    IntersectionSpec spec = four_leg();
    SignalParams params;
    auto queues = busy_queues(int(state.range(0)));
    std::map<LinkId, std::vector<int>> committed;
    for (int l = 1; l <= 4; ++l) {
        std::vector<int> row(2, 0);
        row[(l - 1) / 2] = 3;
        committed[l] = row;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(optimize_discharge(spec, queues, committed, params));
    }
}
BENCHMARK(BM_OptimizeDischarge)->Arg(5)->Arg(25);

void BM_SignalizedCrossingTimes(benchmark::State& state) {
    auto queues = busy_queues(int(state.range(0)));
    PhaseSchedule s = make_schedule(0.0, 2, {14, 8, 14, 8}, 3.0);
    CrossingParams cp;
    for (auto _ : state) {
        auto free_times = free_flow_crossing_times(queues[0], cp);
        benchmark::DoNotOptimize(signalized_crossing_times(queues[0], s, cp, free_times));
    }
}
BENCHMARK(BM_SignalizedCrossingTimes)->Arg(25);

void BM_PlanEnergyOptimal(benchmark::State& state) {
    MotionBounds bounds;
    for (auto _ : state) {
        benchmark::DoNotOptimize(plan_energy_optimal(0.0, 18.0, -200.0, 11.0, 0.0, bounds));
    }
}
BENCHMARK(BM_PlanEnergyOptimal);

void BM_KShortestPaths(benchmark::State& state) {
    NetworkGraph g = load_network_file(default_network_path());
    for (auto _ : state) {
        benchmark::DoNotOptimize(k_shortest_paths(g, 1, 10, 7, 2.0));
    }
}
BENCHMARK(BM_KShortestPaths);

void BM_SimulationSlice(benchmark::State& state) {
    for (auto _ : state) {
        ScenarioConfig cfg = default_scenario();
        cfg.mode = ControlMode::Full;
        cfg.duration = 120.0;
        cfg.seed = 1;
        benchmark::DoNotOptimize(run_simulation(cfg));
    }
}
BENCHMARK(BM_SimulationSlice)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
