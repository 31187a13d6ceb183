#include "mtsim/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mtsim {

std::string to_string(ControlMode mode) {
    switch (mode) {
        case ControlMode::Baseline: return "baseline";
        case ControlMode::SignalOnly: return "signal";
        case ControlMode::SignalCav: return "signal-cav";
        case ControlMode::Full: return "full";
    }
    return "?";
}

ControlMode mode_from_string(const std::string& name) {
    if (name == "baseline") return ControlMode::Baseline;
    if (name == "signal") return ControlMode::SignalOnly;
    if (name == "signal-cav") return ControlMode::SignalCav;
    if (name == "full") return ControlMode::Full;
    throw ConfigError("unknown mode: " + name +
                      " (expected baseline|signal|signal-cav|full)");
}

void ScenarioConfig::validate() const {
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (penetration < 0.0 || penetration > 1.0) {
        throw ConfigError("penetration must lie in [0, 1]");
    }
    for (const DemandEntry& d : demand) {
        if (d.rate_veh_h < 0.0) throw ConfigError("demand rate must be >= 0");
        if (d.origin == d.destination) {
            throw ConfigError("demand origin equals destination: " +
                              std::to_string(d.origin));
        }
    }
    if (k_paths < 1) throw ConfigError("k_paths must be >= 1");
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    for (NodeId o : {1, 2, 13, 20}) {
        for (NodeId d : {10, 11, 15, 16}) {
            c.demand.push_back({o, d, 250.0});
        }
    }
    return c;
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ScenarioConfig load_scenario(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario parse failure: ") + e.what());
    }
    ScenarioConfig c = default_scenario();
    try {
        if (doc.contains("network")) {
            const auto& n = doc["network"];
            maybe(n, "file", c.network_file);
            maybe(n, "k_paths", c.k_paths);
        }
        if (doc.contains("demand")) {
            const auto& d = doc["demand"];
            maybe(d, "penetration", c.penetration);
            maybe(d, "headway_jitter", c.headway_jitter);
            if (d.contains("pairs")) {
                c.demand.clear();
                for (const auto& p : d["pairs"]) {
                    c.demand.push_back({p.at("origin").get<NodeId>(),
                                        p.at("destination").get<NodeId>(),
                                        p.at("rate_veh_h").get<double>()});
                }
            } else if (d.contains("origins") && d.contains("destinations")) {
                double rate = d.value("rate_veh_h", 250.0);
                c.demand.clear();
                for (NodeId o : d["origins"].get<std::vector<NodeId>>()) {
                    for (NodeId dest : d["destinations"].get<std::vector<NodeId>>()) {
                        c.demand.push_back({o, dest, rate});
                    }
                }
            } else if (d.contains("rate_veh_h")) {
                double rate = d["rate_veh_h"].get<double>();
                for (auto& e : c.demand) e.rate_veh_h = rate;
            }
        }
        if (doc.contains("signal")) {
            const auto& s = doc["signal"];
            maybe(s, "n_max", c.signal.n_max);
            maybe(s, "lost_time_s", c.signal.lost_time);
            maybe(s, "fixed_green_s", c.signal.fixed_green);
            maybe(s, "mean_green_init_s", c.signal.mean_green_init);
            maybe(s, "mean_green_ema", c.signal.mean_green_ema);
            maybe(s, "headway_s", c.signal.crossing.headway);
            maybe(s, "startup_delay_s", c.signal.crossing.startup_delay);
            maybe(s, "startup_speed_mps", c.signal.crossing.startup_speed);
        }
        if (doc.contains("cav")) {
            const auto& s = doc["cav"];
            maybe(s, "standstill_m", c.safety.standstill);
            maybe(s, "headway_s", c.safety.headway);
            maybe(s, "barrier_rate", c.safety.barrier_rate);
            maybe(s, "replan_threshold_m", c.safety.replan_threshold);
        }
        if (doc.contains("routing")) {
            const auto& r = doc["routing"];
            maybe(r, "window_s", c.routing.window);
            maybe(r, "macro_step_s", c.routing.macro_step);
            maybe(r, "bin_s", c.routing.bin_width);
            maybe(r, "filter_alpha", c.routing.filter_alpha);
            maybe(r, "debug_dump_dir", c.routing.debug_dump_dir);
        }
        if (doc.contains("idm")) {
            const auto& s = doc["idm"];
            maybe(s, "v_des", c.idm.v_des);
            maybe(s, "a", c.idm.a_max);
            maybe(s, "b", c.idm.b_comf);
            maybe(s, "delta", c.idm.delta);
            maybe(s, "s0", c.idm.s0);
            maybe(s, "T", c.idm.T);
        }
        if (doc.contains("sim")) {
            const auto& s = doc["sim"];
            if (s.contains("mode")) c.mode = mode_from_string(s["mode"].get<std::string>());
            maybe(s, "duration_s", c.duration);
            maybe(s, "dt_s", c.dt);
            maybe(s, "seed", c.seed);
            maybe(s, "junction_time_s", c.junction_time);
            maybe(s, "control_zone_m", c.control_zone);
            maybe(s, "v_max_mps", c.bounds.v_max);
            maybe(s, "u_min_mps2", c.bounds.u_min);
            maybe(s, "u_max_mps2", c.bounds.u_max);
            maybe(s, "stop_margin_m", c.stop_margin);
            maybe(s, "commit_margin_s", c.commit_margin);
            maybe(s, "spawn_speed_mps", c.spawn_speed);
            maybe(s, "gridlock_timeout_s", c.gridlock_timeout);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario parse failure: ") + e.what());
    }
    c.macro_step = c.routing.macro_step;
    c.idm.v_des = std::min(c.idm.v_des, c.bounds.v_max);
    c.validate();
    return c;
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

}  // namespace mtsim
