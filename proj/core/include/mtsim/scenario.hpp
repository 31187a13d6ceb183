#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtsim/cav.hpp"
#include "mtsim/dynamics.hpp"
#include "mtsim/routing.hpp"
#include "mtsim/signal.hpp"
#include "mtsim/types.hpp"

namespace mtsim {

enum class ControlMode { Baseline, SignalOnly, SignalCav, Full };

std::string to_string(ControlMode mode);
ControlMode mode_from_string(const std::string& name);

struct DemandEntry {
    NodeId origin = 0;
    NodeId destination = 0;
    double rate_veh_h = 0.0;
};

struct ScenarioConfig {
    ControlMode mode = ControlMode::Full;
    double duration = 2100.0;
    double dt = 0.1;
    double macro_step = 10.0;
    std::vector<DemandEntry> demand;
    double penetration = 0.5;
    double headway_jitter = 0.2;
    std::uint64_t seed = 1;

    std::string network_file;  // empty -> bundled Sioux Falls
    int k_paths = 7;

    MotionBounds bounds;
    HdvParams idm;
    SignalParams signal;
    SafetyParams safety;
    RoutingParams routing;

    double junction_time = 2.0;
    double control_zone = 200.0;  // fallback when the network file omits R
    double stop_margin = 1.0;
    double commit_margin = 1.0;
    double gridlock_timeout = 300.0;
    double spawn_speed = 13.89;

    // Baseline and signal-only run 100% HDVs regardless of `penetration`.
    double effective_penetration() const {
        return (mode == ControlMode::Baseline || mode == ControlMode::SignalOnly)
                   ? 0.0
                   : penetration;
    }
    bool optimize_signals() const { return mode != ControlMode::Baseline; }
    bool control_cavs() const {
        return mode == ControlMode::SignalCav || mode == ControlMode::Full;
    }
    bool route_cavs() const { return mode == ControlMode::Full; }

    void validate() const;  // throws ConfigError
};

// The bundled experiment: origins {1,2,13,20} x destinations {10,11,15,16},
// 250 veh/h each, 2100 s, 50% penetration.
ScenarioConfig default_scenario();

// Parse a scenario document (sections: network, demand, signal, cav,
// routing, sim, idm); unspecified keys keep the defaults above.
ScenarioConfig load_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

}  // namespace mtsim
