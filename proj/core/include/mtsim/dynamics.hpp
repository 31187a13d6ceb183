#pragma once

#include <map>
#include <span>
#include <vector>

#include "mtsim/types.hpp"

namespace mtsim {

// Longitudinal state. Position is measured from the downstream stop line:
// s = 0 at the line, negative upstream.
struct VehicleState {
    VehicleId id = 0;
    VehicleClass cls = VehicleClass::HDV;
    LinkId link = 0;
    double pos = 0.0;    // s, metres
    double speed = 0.0;  // v, m/s
    double accel = 0.0;  // u, m/s^2 (last commanded)
    double depart_time = 0.0;
};

struct HdvParams {
    double v_des = 13.89;
    double a_max = 1.5;   // IDM acceleration
    double b_comf = 2.0;  // IDM comfortable deceleration
    double delta = 4.0;
    double s0 = 2.0;      // jam distance
    double T = 1.5;       // desired time headway
};

inline constexpr double kInfiniteGap = 1e12;

// Standard IDM acceleration, clamped to [u_min, u_max]. Non-positive gap is
// treated as collision-imminent and returns u_min.
double idm_acceleration(double speed, double gap, double leader_speed,
                        const HdvParams& params, const MotionBounds& bounds);

// Semi-implicit Euler step: v' = clamp(v + u dt, 0, v_max), s' = s + v' dt.
VehicleState step_vehicle(const VehicleState& state, double u, double dt,
                          const MotionBounds& bounds);

struct LeaderView {
    double gap = kInfiniteGap;
    double speed = 0.0;
};

// Red/clearance indication is modelled as a standing ghost vehicle one
// stop_margin upstream of the line; on green the true predecessor governs.
LeaderView virtual_leader_for_signal(const VehicleState& state, bool signal_is_green,
                                     double stop_margin, const LeaderView& predecessor);

// Approach-driver gate: a signal is treated as crossable only while the
// current time lies in a green window and the vehicle can plausibly reach
// the line before that window ends (kinematic estimate + commit margin).
// Vehicles that cannot commit get the stop-line ghost instead, which is what
// keeps crossings out of clearance intervals.
bool signal_crossable(std::span<const TimeInterval> greens, double now,
                      double dist_to_stop, double speed, double commit_margin,
                      const HdvParams& params);

struct RolloutParams {
    HdvParams idm;
    MotionBounds bounds;
    double stop_margin = 1.0;
    double commit_margin = 1.0;
    double ref_speed = 13.89;  // used for the beyond-horizon fallback
};

// Deterministic forward IDM rollout of one approach, including red-light
// ghosts, used to estimate HDV crossing times. `greens` must cover the
// horizon (callers extend published schedules by one projected cycle).
// Vehicles are given closest-to-line first. A vehicle's crossing time is the
// first instant its position reaches the stop line; vehicles still upstream
// at the horizon end map to horizon_end + remaining free-flow time.
std::map<VehicleId, double> predict_hdv_crossings(std::span<const VehicleState> vehicles,
                                                  std::span<const TimeInterval> greens,
                                                  double t_begin, double horizon, double dt,
                                                  const RolloutParams& params);

}  // namespace mtsim
