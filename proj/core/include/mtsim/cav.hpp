#pragma once

#include <optional>
#include <span>

#include "mtsim/dynamics.hpp"
#include "mtsim/types.hpp"

namespace mtsim {

struct CrossingAssignment {
    double crossing_time = 0.0;   // t_cr
    TimeInterval interval;        // chosen green
    double earliest = 0.0;        // t_cr_min
    double predecessor_bound = 0.0;  // t_pr_cr + T
    bool projected = false;       // landed in the extrapolated cycle
};

// Reference trajectory p(t) = c3 x^3 + c2 x^2 + c1 x + c0 with x = t - start_time.
// Terminal acceleration is zero by construction.
struct TrajectoryPlan {
    double c3 = 0.0, c2 = 0.0, c1 = 0.0, c0 = 0.0;
    double start_time = 0.0;
    double end_time = 0.0;
    double start_pos = 0.0;
    double start_speed = 0.0;
    double end_pos = 0.0;

    double pos(double t) const {
        double x = t - start_time;
        return ((c3 * x + c2) * x + c1) * x + c0;
    }
    double speed(double t) const {
        double x = t - start_time;
        return (3.0 * c3 * x + 2.0 * c2) * x + c1;
    }
    double accel(double t) const { return 6.0 * c3 * (t - start_time) + 2.0 * c2; }
    double duration() const { return end_time - start_time; }
};

struct SafetyParams {
    double standstill = 2.0;      // s0
    double headway = 1.0;         // T
    double barrier_rate = 0.8;    // kappa
    double replan_threshold = 2.0;  // eps, metres
};

// Minimum feasible stop-line arrival for a double integrator: full
// acceleration to v_max, then cruise. Returns an absolute time.
double earliest_arrival_time(double t0, double dist, double v0, double v_max, double u_max);

// Earliest admissible instant inside a green on or after
// max(earliest, predecessor_crossing + headway). Returns nullopt when no
// listed interval (including projected ones) admits the bound.
std::optional<CrossingAssignment> select_crossing_time(std::span<const TimeInterval> greens,
                                                       double earliest,
                                                       double predecessor_crossing,
                                                       double headway);

// Energy-optimal cubic through p(t0)=s0_pos, v(t0)=v0, p(t_cr)=s_cr with
// u(t_cr)=0; nullopt when the induced trajectory violates speed or control
// bounds anywhere on [t0, t_cr].
std::optional<TrajectoryPlan> plan_energy_optimal(double t0, double t_cr, double s0_pos,
                                                  double v0, double s_cr,
                                                  const MotionBounds& bounds);

// Crossing durations D = t_cr - t0 for which the cubic respects the bounds
// (closed form; empty window collapses to lo > hi).
struct DurationWindow {
    double lo = 0.0;
    double hi = 0.0;
    bool valid() const { return lo <= hi; }
};
DurationWindow feasible_duration_window(double dist, double v0, const MotionBounds& bounds);

// Smooth stop at s_stop with terminal speed and acceleration zero; the stop
// duration 3*dist/v0 follows from the same cubic family. Near-standstill
// states yield a degenerate hold plan.
TrajectoryPlan plan_stop(double t0, double s0_pos, double v0, double s_stop);

// 1/2 integral of u^2 over the plan, closed form.
double trajectory_energy(const TrajectoryPlan& plan);

struct SafetyResult {
    double accel = 0.0;
    bool constrained = false;   // barrier cap was active
    bool infeasible = false;    // cap fell below u_min
};

// Scalar projection of min 1/2 (u - u_ref)^2 subject to hdot + kappa h >= 0
// and control bounds, with h = p_j - p_i - s0 - v_i T:
// u* = clamp(min(u_ref, (v_j - v_i + kappa h) / T), u_min, u_max).
SafetyResult reactive_safety_control(double u_ref, const VehicleState& ego,
                                     const VehicleState* leader, const SafetyParams& params,
                                     const MotionBounds& bounds);

enum class ReplanAction { Keep, Refresh, Reselect, Defer };

struct ReplanResult {
    ReplanAction action = ReplanAction::Keep;
    std::optional<CrossingAssignment> assignment;
    std::optional<TrajectoryPlan> plan;
};

// Event-triggered replanning: below the deviation threshold the plan is
// kept; otherwise the crossing bound is re-evaluated with the fresh
// predecessor estimate and either the trajectory is refreshed toward the
// same crossing time or a new crossing is selected.
ReplanResult check_and_replan(const TrajectoryPlan& plan, const CrossingAssignment& current,
                              double now, double pos, double speed,
                              double fresh_earliest, double fresh_predecessor_crossing,
                              std::span<const TimeInterval> greens,
                              const SafetyParams& params, const MotionBounds& bounds);

}  // namespace mtsim
