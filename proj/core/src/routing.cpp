#include "mtsim/routing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mtsim {

SensitivityEstimate estimate_sensitivity(const EdgeMeasurement& prev,
                                         const EdgeMeasurement& curr,
                                         const SensitivityEstimate& prior, double alpha) {
    SensitivityEstimate out;
    double dn = curr.accumulation - prev.accumulation;
    if (std::abs(dn) > 1e-9) {
        out.raw = (curr.travel_time - prev.travel_time) / dn;
    } else {
        out.raw = prior.raw;  // division guard: retain
    }
    out.filtered = alpha * out.raw + (1.0 - alpha) * prior.filtered;
    if (out.filtered < 0.0) out.filtered = 0.0;
    return out;
}

MemoryMatrices::MemoryMatrices(int num_edges, int horizon_bins)
    : num_edges_(num_edges),
      horizon_(horizon_bins),
      hdv_(size_t(num_edges) * horizon_bins, 0.0),
      cav_(size_t(num_edges) * horizon_bins, 0.0) {}

int MemoryMatrices::clamp_bin(int bin) const {
    if (bin < 0) return 0;
    if (bin >= horizon_) {
        ++truncated_;
        return horizon_ - 1;
    }
    return bin;
}

void MemoryMatrices::add_hdv(int edge_idx, int bin, double amount) {
    hdv_[size_t(edge_idx) * horizon_ + clamp_bin(bin)] += amount;
}

void MemoryMatrices::add_cav(int edge_idx, int bin, double amount) {
    cav_[size_t(edge_idx) * horizon_ + clamp_bin(bin)] += amount;
}

double MemoryMatrices::hdv_at(int edge_idx, int bin) const {
    return hdv_[size_t(edge_idx) * horizon_ + clamp_bin(bin)];
}

double MemoryMatrices::cav_at(int edge_idx, int bin) const {
    return cav_[size_t(edge_idx) * horizon_ + clamp_bin(bin)];
}

double MemoryMatrices::at(int edge_idx, int bin) const {
    return hdv_at(edge_idx, bin) + cav_at(edge_idx, bin);
}

void MemoryMatrices::add(int edge_idx, int bin, double amount) {
    add_cav(edge_idx, bin, amount);
}

double MemoryMatrices::total() const {
    double s = 0.0;
    for (double v : hdv_) s += v;
    for (double v : cav_) s += v;
    return s;
}

Router::Router(const NetworkGraph& graph, const RoutingParams& params, double horizon_s)
    : graph_(&graph), params_(params) {
    int n = int(graph.links.size());
    free_flow_.resize(n);
    meas_.resize(n);
    prev_meas_.resize(n);
    sens_.resize(n);
    for (int i = 0; i < n; ++i) {
        free_flow_[i] = graph.links[i].free_flow_time() + params_.edge_time_offset;
        meas_[i].travel_time = free_flow_[i];  // initialized to free-flow
    }
    int bins = std::max(1, int(std::ceil(horizon_s / params_.bin_width)) + 1);
    memory_ = MemoryMatrices(n, bins);
}

int Router::bin_of(double t) const {
    return std::max(0, int(std::floor(t / params_.bin_width)));
}

void Router::update_measurements(double now, std::span<const TraversalEvent> completions,
                                 std::span<const int> on_edge_counts) {
    prev_meas_ = meas_;
    int n = int(meas_.size());
    double window_start = now - params_.window;
    for (const TraversalEvent& ev : completions) {
        if (ev.exit_time <= now + 1e-9) window_.push_back(ev);
    }
    while (!window_.empty() && window_.front().exit_time <= window_start + 1e-9) {
        window_.pop_front();
    }
    std::vector<double> sum(n, 0.0);
    std::vector<int> cnt(n, 0);
    for (const TraversalEvent& ev : window_) {
        sum[ev.edge_index] += ev.exit_time - ev.entry_time;
        ++cnt[ev.edge_index];
    }
    for (int e = 0; e < n; ++e) {
        if (cnt[e] > 0) {
            meas_[e].travel_time = sum[e] / cnt[e];
        }  // otherwise the previous value is kept
        meas_[e].completions = cnt[e];
        meas_[e].accumulation = e < int(on_edge_counts.size()) ? on_edge_counts[e] : 0.0;
        meas_[e].timestamp = now;
    }
    if (have_prev_) {
        for (int e = 0; e < n; ++e) {
            sens_[e] = estimate_sensitivity(prev_meas_[e], meas_[e], sens_[e],
                                            params_.filter_alpha);
        }
    }
    have_prev_ = true;
}

double Router::project_travel_time(int edge_idx, int bin) const {
    double n_pred = memory_.at(edge_idx, bin);
    double tau = meas_[edge_idx].travel_time +
                 sens_[edge_idx].filtered * (n_pred - meas_[edge_idx].accumulation);
    return std::max(free_flow_[edge_idx], tau);
}

Router::PathCost Router::path_marginal_cost(const Path& path, double depart_time) const {
    PathCost out;
    double clock = depart_time;
    for (LinkId lid : path.links) {
        const LinkSpec* l = graph_->link_by_id(lid);
        int e = int(l - graph_->links.data());
        int bin = memory_.clamp_bin(bin_of(clock));
        double tau = project_travel_time(e, bin);
        double n_pred = memory_.at(e, bin);
        out.marginal_cost += tau + n_pred * sens_[e].filtered;
        out.edge_entries.push_back({e, clock});
        out.edge_times.push_back(tau);
        clock += tau;
    }
    return out;
}

RouteAssignment Router::assign_route(VehicleId vehicle, const PathSet& paths,
                                     double depart_time) {
    RouteAssignment out;
    out.vehicle = vehicle;
    if (paths.paths.empty()) {
        throw ConfigError("assign_route: empty path set for vehicle " +
                          std::to_string(vehicle));
    }
    int best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<PathCost> costs;
    costs.reserve(paths.paths.size());
    for (int p = 0; p < int(paths.paths.size()); ++p) {
        costs.push_back(path_marginal_cost(paths.paths[p], depart_time));
        out.candidate_costs.push_back(costs.back().marginal_cost);
        if (costs.back().marginal_cost < best_cost) {  // ties keep the lowest index
            best_cost = costs.back().marginal_cost;
            best = p;
        }
    }
    out.path_index = best;
    out.predicted_cost = best_cost;
    out.edge_entries = costs[best].edge_entries;
    register_reservation(out, costs[best].edge_times);
    return out;
}

void Router::register_reservation(const RouteAssignment& assignment,
                                  const std::vector<double>& edge_times) {
    for (size_t i = 0; i < assignment.edge_entries.size(); ++i) {
        auto [e, entry] = assignment.edge_entries[i];
        int b0 = bin_of(entry);
        int b1 = bin_of(entry + edge_times[i] - 1e-9);
        for (int b = b0; b <= b1; ++b) memory_.add_cav(e, b, 1.0);
    }
}

void Router::register_hdv(const Path& path, double depart_time) {
    double clock = depart_time;
    for (LinkId lid : path.links) {
        const LinkSpec* l = graph_->link_by_id(lid);
        int e = int(l - graph_->links.data());
        double tau = free_flow_[e];
        int b0 = bin_of(clock);
        int b1 = bin_of(clock + tau - 1e-9);
        for (int b = b0; b <= b1; ++b) memory_.add_hdv(e, b, 1.0);
        clock += tau;
    }
}

std::string Router::dump_state() const {
    std::string out = "edge\ttau\tN\teta_raw\teta\tN_pred[next 12 bins]\n";
    char buf[160];
    int bin0 = 0;
    for (size_t e = 0; e < meas_.size(); ++e) {
        if (e == 0) bin0 = bin_of(meas_[e].timestamp);
        std::snprintf(buf, sizeof(buf), "%d\t%.3f\t%.1f\t%.6f\t%.6f",
                      graph_->links[e].id, meas_[e].travel_time, meas_[e].accumulation,
                      sens_[e].raw, sens_[e].filtered);
        out += buf;
        for (int b = bin0; b < bin0 + 12; ++b) {
            std::snprintf(buf, sizeof(buf), "\t%.0f", memory_.at(int(e), memory_.clamp_bin(b)));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace mtsim
