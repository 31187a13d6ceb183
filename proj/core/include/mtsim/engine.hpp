#pragma once

#include <map>
#include <memory>
#include <vector>

#include "mtsim/metrics.hpp"
#include "mtsim/network.hpp"
#include "mtsim/scenario.hpp"
#include "mtsim/signal.hpp"

namespace mtsim {

struct SpawnRecord {
    double time = 0.0;
    NodeId origin = 0;
    NodeId destination = 0;
    bool is_cav = false;
    int od_index = 0;
    int seq = 0;  // global spawn order
};

// Pre-computed arrival table: per OD pair, jittered uniform headways
// (3600/rate +- jitter), CAV class drawn per spawn. Deterministic in
// (config, seed) and shared across modes with the same seed.
std::vector<SpawnRecord> generate_demand(const ScenarioConfig& config);

// Equal greens of `green` seconds for every phase, cycling indefinitely
// (re-anchored each cycle by the engine). Unsignalized nodes get none.
std::map<NodeId, PhaseSchedule> fixed_time_plans(const NetworkGraph& network,
                                                 double green, double h_c);

class Simulation {
  public:
    explicit Simulation(const ScenarioConfig& config);
    Simulation(const ScenarioConfig& config, const NetworkGraph& network);
    ~Simulation();

    MetricsLog run();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

MetricsLog run_simulation(const ScenarioConfig& config);

}  // namespace mtsim
