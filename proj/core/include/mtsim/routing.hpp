#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "mtsim/network.hpp"
#include "mtsim/types.hpp"

namespace mtsim {

struct EdgeMeasurement {
    double travel_time = 0.0;   // rolling-window mean over completed traversals
    double accumulation = 0.0;  // current on-edge count
    double timestamp = 0.0;
    int completions = 0;        // traversals inside the window
};

struct SensitivityEstimate {
    double raw = 0.0;
    double filtered = 0.0;  // low-pass, clamped >= 0
};

// raw = dtau/dN finite difference when the accumulation moved, else the prior
// raw is retained; filtered = alpha * raw + (1 - alpha) * prior.filtered.
SensitivityEstimate estimate_sensitivity(const EdgeMeasurement& prev,
                                         const EdgeMeasurement& curr,
                                         const SensitivityEstimate& prior, double alpha);

// MC_e = tau_e + N_e * eta_e
inline double marginal_cost_edge(double tau, double accumulation, double eta) {
    return tau + accumulation * eta;
}

// Per-edge, per-time-bin predicted occupancy.
class MemoryMatrices {
  public:
    MemoryMatrices() = default;
    MemoryMatrices(int num_edges, int horizon_bins);

    int horizon() const { return horizon_; }
    int clamp_bin(int bin) const;  // bins beyond the horizon use the last bin
    void add(int edge_idx, int bin, double amount);
    double at(int edge_idx, int bin) const;
    double total() const;
    int truncated_bins() const { return truncated_; }

  private:
    int num_edges_ = 0;
    int horizon_ = 0;
    mutable int truncated_ = 0;
    std::vector<double> hdv_, cav_;
    friend class Router;
    double& cell(std::vector<double>& m, int e, int b) { return m[size_t(e) * horizon_ + b]; }

  public:
    void add_hdv(int edge_idx, int bin, double amount);
    void add_cav(int edge_idx, int bin, double amount);
    double hdv_at(int edge_idx, int bin) const;
    double cav_at(int edge_idx, int bin) const;
};

struct RouteAssignment {
    VehicleId vehicle = 0;
    int path_index = 0;
    double predicted_cost = 0.0;
    std::vector<double> candidate_costs;          // one per candidate path
    std::vector<std::pair<int, double>> edge_entries;  // (edge index, entry time)
};

struct TraversalEvent {
    int edge_index = 0;
    double entry_time = 0.0;
    double exit_time = 0.0;
};

struct RoutingParams {
    double window = 300.0;      // rolling measurement window, s
    double macro_step = 10.0;   // delta t'
    double bin_width = 10.0;
    double filter_alpha = 0.3;
    double edge_time_offset = 0.0;  // junction traversal added to free-flow floors
    std::string debug_dump_dir;     // when set, state dumps per macro step
};

class Router {
  public:
    Router(const NetworkGraph& graph, const RoutingParams& params, double horizon_s);

    // Rolling-window travel times from completed traversals plus current
    // accumulations, then the per-edge sensitivity update. Call once per
    // macro step with all events completed since the previous call.
    void update_measurements(double now, std::span<const TraversalEvent> completions,
                             std::span<const int> on_edge_counts);

    const EdgeMeasurement& measurement(int edge_idx) const { return meas_[edge_idx]; }
    const SensitivityEstimate& sensitivity(int edge_idx) const { return sens_[edge_idx]; }
    const MemoryMatrices& matrices() const { return memory_; }
    MemoryMatrices& matrices() { return memory_; }
    double free_flow_time(int edge_idx) const { return free_flow_[edge_idx]; }
    int bin_of(double t) const;

    // tau_hat = max(tau_free, tau_measured + eta * (N(m) - N_measured))
    double project_travel_time(int edge_idx, int bin) const;

    // Edge-by-edge accumulation of projected arrival times and marginal
    // costs. Returns the path cost and per-edge (entry time, projected tau).
    struct PathCost {
        double marginal_cost = 0.0;
        std::vector<std::pair<int, double>> edge_entries;  // (edge index, entry time)
        std::vector<double> edge_times;                    // projected tau per edge
    };
    PathCost path_marginal_cost(const Path& path, double depart_time) const;

    // argmin over candidates (lowest index on ties); the chosen path's
    // anticipated presence is reserved in the CAV matrix.
    RouteAssignment assign_route(VehicleId vehicle, const PathSet& paths, double depart_time);

    // HDVs register their shortest path with free-flow bin estimates.
    void register_hdv(const Path& path, double depart_time);

    // Tabular state dump (edge, tau, N, eta raw/filtered) for debugging.
    std::string dump_state() const;

  private:
    void register_reservation(const RouteAssignment& assignment,
                              const std::vector<double>& edge_times);

    const NetworkGraph* graph_;
    RoutingParams params_;
    std::vector<double> free_flow_;
    std::vector<EdgeMeasurement> meas_, prev_meas_;
    std::vector<SensitivityEstimate> sens_;
    MemoryMatrices memory_;
    std::deque<TraversalEvent> window_;  // completions inside the rolling window
    bool have_prev_ = false;
};

}  // namespace mtsim
