#include "mtsim/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace mtsim {

double idm_acceleration(double speed, double gap, double leader_speed,
                        const HdvParams& params, const MotionBounds& bounds) {
    if (gap <= 0.0) return bounds.u_min;  // collision-imminent
    double dv = speed - leader_speed;
    double s_star = params.s0 +
                    std::max(0.0, speed * params.T +
                                      speed * dv / (2.0 * std::sqrt(params.a_max * params.b_comf)));
    double a = params.a_max *
               (1.0 - std::pow(speed / params.v_des, params.delta) - (s_star / gap) * (s_star / gap));
    return std::clamp(a, bounds.u_min, bounds.u_max);
}

VehicleState step_vehicle(const VehicleState& state, double u, double dt,
                          const MotionBounds& bounds) {
    VehicleState next = state;
    double uc = std::clamp(u, bounds.u_min, bounds.u_max);
    next.speed = std::clamp(state.speed + uc * dt, 0.0, bounds.v_max);
    next.pos = state.pos + next.speed * dt;
    next.accel = uc;
    return next;
}

LeaderView virtual_leader_for_signal(const VehicleState& state, bool signal_is_green,
                                     double stop_margin, const LeaderView& predecessor) {
    if (signal_is_green) return predecessor;
    LeaderView ghost;
    ghost.gap = -state.pos - stop_margin;
    ghost.speed = 0.0;
    // the nearer of the standing ghost and the real predecessor governs
    return ghost.gap < predecessor.gap ? ghost : predecessor;
}

namespace {

// kinematic time to cover `dist` accelerating at a toward v_des
double time_to_cover(double dist, double speed, const HdvParams& params) {
    if (dist <= 0.0) return 0.0;
    double v = std::max(speed, 0.0);
    double a = std::max(params.a_max, 1e-3);
    double v_top = std::max(params.v_des, v);
    double t_ramp = (v_top - v) / a;
    double d_ramp = (v_top * v_top - v * v) / (2.0 * a);
    if (d_ramp >= dist) {
        return (-v + std::sqrt(v * v + 2.0 * a * dist)) / a;
    }
    return t_ramp + (dist - d_ramp) / v_top;
}

}  // namespace

bool signal_crossable(std::span<const TimeInterval> greens, double now,
                      double dist_to_stop, double speed, double commit_margin,
                      const HdvParams& params) {
    for (const TimeInterval& g : greens) {
        if (g.contains(now)) {
            if (g.end - g.begin > 1e11) return true;  // unsignalized sentinel
            double eta = time_to_cover(dist_to_stop, speed, params);
            return now + eta + commit_margin <= g.end;
        }
    }
    return false;
}

std::map<VehicleId, double> predict_hdv_crossings(std::span<const VehicleState> vehicles,
                                                  std::span<const TimeInterval> greens,
                                                  double t_begin, double horizon, double dt,
                                                  const RolloutParams& params) {
    std::map<VehicleId, double> crossings;
    if (vehicles.empty()) return crossings;

    std::vector<VehicleState> fleet(vehicles.begin(), vehicles.end());
    std::vector<bool> crossed(fleet.size(), false);
    size_t remaining = fleet.size();

    int steps = int(std::ceil(horizon / dt));
    for (int k = 0; k < steps && remaining > 0; ++k) {
        double t = t_begin + k * dt;
        // controls from the current snapshot, front to back
        std::vector<double> u(fleet.size(), 0.0);
        const VehicleState* leader = nullptr;
        for (size_t i = 0; i < fleet.size(); ++i) {
            if (crossed[i]) continue;
            LeaderView pred;
            if (leader != nullptr) {
                pred.gap = leader->pos - fleet[i].pos;
                pred.speed = leader->speed;
            }
            bool green = signal_crossable(greens, t, -fleet[i].pos, fleet[i].speed,
                                          params.commit_margin, params.idm);
            LeaderView view = virtual_leader_for_signal(fleet[i], green, params.stop_margin, pred);
            u[i] = idm_acceleration(fleet[i].speed, view.gap, view.speed, params.idm,
                                    params.bounds);
            leader = &fleet[i];
        }
        for (size_t i = 0; i < fleet.size(); ++i) {
            if (crossed[i]) continue;
            VehicleState next = step_vehicle(fleet[i], u[i], dt, params.bounds);
            if (next.pos >= 0.0) {
                // interpolate the crossing instant within the step
                double frac = next.speed > 1e-9
                                  ? std::clamp(-fleet[i].pos / (next.speed * dt), 0.0, 1.0)
                                  : 1.0;
                crossings[fleet[i].id] = t + frac * dt;
                crossed[i] = true;
                --remaining;
            }
            fleet[i] = next;
        }
    }
    double t_end = t_begin + steps * dt;
    for (size_t i = 0; i < fleet.size(); ++i) {
        if (!crossed[i]) {
            crossings[fleet[i].id] = t_end + (-fleet[i].pos) / params.ref_speed;
        }
    }
    return crossings;
}

}  // namespace mtsim
