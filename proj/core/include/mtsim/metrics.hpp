#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtsim/types.hpp"

namespace mtsim {

struct OdStat {
    double total_time = 0.0;  // seconds over completed trips
    int trips = 0;
};

struct MetricsLog {
    double bin_width = 10.0;
    double duration = 0.0;

    std::vector<int> accumulation;        // network vehicle count per bin
    std::vector<LinkId> edge_ids;
    std::vector<long long> edge_volume;   // cumulative entries per edge
    std::vector<double> edge_time_avg;    // time-averaged on-edge count
    std::map<std::pair<NodeId, NodeId>, OdStat> od_times;

    std::vector<std::string> events;      // preformatted JSON lines

    struct AssignmentAudit {
        VehicleId vehicle = 0;
        int chosen = 0;
        double chosen_cost = 0.0;
        double best_other_cost = 0.0;  // +inf when there was no alternative
    };
    std::vector<AssignmentAudit> assignments;

    long long spawned = 0;
    long long arrived = 0;
    long long deferred_spawns = 0;
    long long replans = 0;
    long long crossing_deferrals = 0;
    long long safety_infeasible = 0;
    long long signal_violations = 0;   // stop-line crossings during red/clearance
    long long contact_events = 0;      // follower clamped onto its leader
    bool conservation_ok = true;

    double ttt_accumulation = 0.0;  // bin_width * sum of accumulation samples
    double ttt_edge_bins = 0.0;     // bin_width * sum of per-edge bin counts
    int peak_accumulation = 0;

    double mean_od_minutes() const;
};

// J = integral of network accumulation over time (veh * s).
double total_travel_time(const MetricsLog& log);

// Writes accumulation.csv, edge_volumes.csv, od_times.csv and events.jsonl
// into `out_dir` (created if missing). Throws ConfigError when unwritable.
void export_metrics(const MetricsLog& log, const std::string& out_dir);

}  // namespace mtsim
