#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mtsim/dynamics.hpp"
#include "mtsim/network.hpp"
#include "mtsim/types.hpp"

namespace mtsim {

// Two-cycle signal policy. Green starts/ends are relative to start_time;
// step h (0-based) runs phase ((h mod M) + 1 in 1-based terms).
struct PhaseSchedule {
    double start_time = 0.0;
    int num_phases = 0;  // M
    double clearance = 0.0;
    std::vector<int> phase;        // sigma(h), 0-based phase index, size 2M
    std::vector<double> green;     // eta_h
    std::vector<double> green_start;  // tau_h
    std::vector<double> green_end;    // theta_h
    int active_phase = 0;          // sigma_0 at start_time
    double remaining = 0.0;        // eta_0 at start_time

    int steps() const { return int(phase.size()); }
    double horizon_end() const { return green_end.empty() ? 0.0 : green_end.back(); }
    // next cycle boundary (start of step M), absolute
    double next_cycle_time() const;
};

// Exact recursion: tau_1 = 0, theta_h = tau_h + eta_h, tau_h = theta_{h-1} + h_c.
std::pair<std::vector<double>, std::vector<double>>
compute_phase_timing(const std::vector<double>& eta, double h_c);

PhaseSchedule make_schedule(double start_time, int num_phases,
                            const std::vector<double>& eta, double h_c);

struct QueuedVehicle {
    double dist_to_stop = 0.0;  // p_i >= 0
    double speed = 0.0;
    VehicleClass cls = VehicleClass::HDV;
    VehicleId id = 0;
};

struct LinkQueueSnapshot {
    LinkId link = 0;
    std::vector<QueuedVehicle> vehicles;  // index 0 closest to the stop line
    int phase_index = 0;   // pi(l), 0-based
    double mean_green = 0.0;  // w_bar for the beyond-horizon projection
    double ref_speed = 13.89;  // V_c of the link
};

struct CrossingParams {
    double headway = 2.0;        // h_f
    double startup_delay = 2.0;  // eps0, added when v < startup_speed
    double startup_speed = 0.5;
};

// Free-flow crossing times: t_i = max(p_i / V_c + eps(v_i), t_{i-1} + h_f),
// headway term omitted for the lead vehicle.
std::vector<double> free_flow_crossing_times(const LinkQueueSnapshot& queue,
                                             const CrossingParams& params);

// Three-branch signalized crossing times against a schedule, evaluated
// sequentially with the reference time r_i = max(free_i, sig_{i-1} + h_f).
// Zero-duration greens offer no crossing opportunity, and the result is
// clamped below by r_i so delays are nonnegative and queue times stay
// h_f-separated. Times are relative to schedule.start_time.
std::vector<double> signalized_crossing_times(const LinkQueueSnapshot& queue,
                                              const PhaseSchedule& schedule,
                                              const CrossingParams& params,
                                              const std::vector<double>& free_times);

// d_i = sig_i - free_i (>= 0).
std::vector<double> estimated_delays(const LinkQueueSnapshot& queue,
                                     const PhaseSchedule& schedule,
                                     const CrossingParams& params);

struct DischargePlan {
    std::map<LinkId, std::vector<int>> counts;  // n_{l,h}, size 2M per link
    std::vector<double> lost_time;              // eps_h
    std::vector<double> eta;                    // induced green durations
    int n_max = 8;
    double objective = 0.0;
};

struct SignalParams {
    int n_max = 8;
    double lost_time = 2.0;      // eps per non-skipped step
    double fixed_green = 20.0;   // baseline plans
    double mean_green_init = 9.0;
    double mean_green_ema = 0.2;
    CrossingParams crossing;
};

// eta_h = (max served count) * h_f + eps_h; empty served set gives 0.
std::vector<double> green_durations_from_counts(const DischargePlan& plan,
                                                const IntersectionSpec& spec);

// Exhaustive search over the free second cycle, one integer per step (the
// objective depends on counts only through the per-step maximum). Committed
// first-cycle counts are validated against phase compatibility and the cap
// and must cover steps 0..M-1. Lexicographically smallest optimum wins.
DischargePlan optimize_discharge(const IntersectionSpec& spec,
                                 const std::vector<LinkQueueSnapshot>& queues,
                                 const std::map<LinkId, std::vector<int>>& committed,
                                 const SignalParams& params);

// Green intervals of the link's phase over the published horizon, absolute
// times, zero-duration steps omitted. Unsignalized links yield [now, inf).
std::vector<TimeInterval> green_intervals_for_link(const PhaseSchedule& schedule,
                                                   int phase_index);

// Same plus one projected cycle appended (branch-3 style extrapolation with
// width mean_green), flagged projected.
std::vector<TimeInterval> green_intervals_extended(const PhaseSchedule& schedule,
                                                   int phase_index, double mean_green);

struct BroadcastRecord {
    NodeId intersection = 0;
    double timestamp = 0.0;
    PhaseSchedule schedule;
    DischargePlan plan;
};

// Receding-horizon controller state for one intersection. Re-solves at each
// cycle boundary: measure queues, keep the committed cycle, optimize the
// second, publish, then commit the optimized cycle for the next invocation.
class IntersectionController {
  public:
    IntersectionController(const IntersectionSpec& spec, const SignalParams& params,
                           bool fixed_time);

    double next_update_time() const { return next_update_; }
    const PhaseSchedule& schedule() const { return schedule_; }
    bool has_schedule() const { return !schedule_.phase.empty(); }
    double mean_green(LinkId link) const;
    const IntersectionSpec& spec() const { return spec_; }

    // Must be invoked exactly at a cycle boundary (throws std::logic_error
    // otherwise once a schedule exists).
    BroadcastRecord receding_horizon_update(double now,
                                            const std::vector<LinkQueueSnapshot>& queues);

  private:
    IntersectionSpec spec_;
    SignalParams params_;
    bool fixed_time_ = false;
    PhaseSchedule schedule_;
    std::map<LinkId, std::vector<int>> committed_;
    std::map<LinkId, double> mean_green_;
    double next_update_ = 0.0;
};

}  // namespace mtsim
