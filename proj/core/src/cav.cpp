#include "mtsim/cav.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtsim {

double earliest_arrival_time(double t0, double dist, double v0, double v_max, double u_max) {
    if (dist <= 0.0) return t0;
    double ramp_dist = (v_max * v_max - v0 * v0) / (2.0 * u_max);
    if (ramp_dist >= dist) {
        return t0 + (-v0 + std::sqrt(v0 * v0 + 2.0 * u_max * dist)) / u_max;
    }
    return t0 + (v_max - v0) / u_max + (dist - ramp_dist) / v_max;
}

std::optional<CrossingAssignment> select_crossing_time(std::span<const TimeInterval> greens,
                                                       double earliest,
                                                       double predecessor_crossing,
                                                       double headway) {
    double bound = std::max(earliest, predecessor_crossing + headway);
    for (const TimeInterval& g : greens) {
        if (g.end >= bound) {
            CrossingAssignment a;
            a.crossing_time = std::max(g.begin, bound);
            a.interval = g;
            a.earliest = earliest;
            a.predecessor_bound = predecessor_crossing + headway;
            a.projected = g.projected;
            return a;
        }
    }
    return std::nullopt;
}

std::optional<TrajectoryPlan> plan_energy_optimal(double t0, double t_cr, double s0_pos,
                                                  double v0, double s_cr,
                                                  const MotionBounds& bounds) {
    double dur = t_cr - t0;
    if (!(dur > 0.0) || !(s_cr > s0_pos)) return std::nullopt;

    // boundary solve in the local frame x = t - t0 with u(dur) = 0:
    // c3 = -(ds - v0 dur) / (2 dur^3), c2 = -3 c3 dur
    double slack = s_cr - s0_pos - v0 * dur;
    TrajectoryPlan plan;
    plan.c3 = -slack / (2.0 * dur * dur * dur);
    plan.c2 = 3.0 * slack / (2.0 * dur * dur);
    plan.c1 = v0;
    plan.c0 = s0_pos;
    plan.start_time = t0;
    plan.end_time = t_cr;
    plan.start_pos = s0_pos;
    plan.start_speed = v0;
    plan.end_pos = s_cr;

    // u is linear and vanishes at the end, so speed is monotone; still check
    // the analytic speed extremum plus a sweep for robustness
    const double tol = 1e-9;
    auto speed_ok = [&](double v) { return v >= -tol && v <= bounds.v_max + tol; };
    auto accel_ok = [&](double u) { return u >= bounds.u_min - tol && u <= bounds.u_max + tol; };
    if (!speed_ok(plan.speed(t0)) || !speed_ok(plan.speed(t_cr))) return std::nullopt;
    if (!accel_ok(plan.accel(t0)) || !accel_ok(plan.accel(t_cr))) return std::nullopt;
    if (std::abs(plan.c3) > 1e-15) {
        double x_ext = -plan.c2 / (3.0 * plan.c3);
        if (x_ext > 0.0 && x_ext < dur && !speed_ok(plan.speed(t0 + x_ext))) {
            return std::nullopt;
        }
    }
    int samples = std::max(4, int(dur / 0.05));
    for (int i = 0; i <= samples; ++i) {
        double t = t0 + dur * i / samples;
        if (!speed_ok(plan.speed(t)) || !accel_ok(plan.accel(t))) return std::nullopt;
    }
    return plan;
}

DurationWindow feasible_duration_window(double dist, double v0, const MotionBounds& bounds) {
    DurationWindow w;
    // terminal speed v0 + 3 (dist - v0 D) / (2 D) decreases in D:
    //   <= v_max  =>  D >= 3 dist / (2 v_max + v0)
    //   >= 0      =>  D <= 3 dist / v0           (unbounded when v0 ~ 0)
    w.lo = 3.0 * dist / (2.0 * bounds.v_max + v0);
    w.hi = v0 > 1e-9 ? 3.0 * dist / v0 : std::numeric_limits<double>::infinity();

    // initial control u(0) = 3 (dist - v0 D) / D^2:
    //   <= u_max  =>  u_max D^2 + 3 v0 D - 3 dist >= 0
    if (bounds.u_max > 0.0) {
        double disc = 9.0 * v0 * v0 + 12.0 * bounds.u_max * dist;
        double d_lo = (-3.0 * v0 + std::sqrt(disc)) / (2.0 * bounds.u_max);
        w.lo = std::max(w.lo, d_lo);
    }
    //   >= u_min (u_min < 0): u_min D^2 + 3 v0 D - 3 dist <= 0, upper root bounds D
    if (bounds.u_min < 0.0) {
        double disc = 9.0 * v0 * v0 + 12.0 * bounds.u_min * dist;
        if (disc >= 0.0 && v0 > 1e-9) {
            // parabola opens downward; constraint fails between the roots
            double r1 = (-3.0 * v0 + std::sqrt(disc)) / (2.0 * bounds.u_min);
            w.hi = std::min(w.hi, r1);
        }
    }
    return w;
}

TrajectoryPlan plan_stop(double t0, double s0_pos, double v0, double s_stop) {
    TrajectoryPlan plan;
    plan.start_time = t0;
    plan.start_pos = s0_pos;
    plan.start_speed = v0;
    plan.end_pos = s_stop;
    double dist = s_stop - s0_pos;
    if (v0 < 1e-6 || dist <= 0.0) {
        // already (nearly) standing: hold position
        plan.c0 = s0_pos;
        plan.end_time = t0;
        plan.end_pos = s0_pos;
        return plan;
    }
    // cubic with v(D) = 0 and u(D) = 0: D = 3 dist / v0
    double dur = 3.0 * dist / v0;
    plan.c3 = v0 / (3.0 * dur * dur);
    plan.c2 = -3.0 * plan.c3 * dur;
    plan.c1 = v0;
    plan.c0 = s0_pos;
    plan.end_time = t0 + dur;
    return plan;
}

double trajectory_energy(const TrajectoryPlan& plan) {
    // 1/2 integral over [0, D] of (6 c3 x + 2 c2)^2 dx
    double d = plan.duration();
    return 6.0 * plan.c3 * plan.c3 * d * d * d + 6.0 * plan.c3 * plan.c2 * d * d +
           2.0 * plan.c2 * plan.c2 * d;
}

SafetyResult reactive_safety_control(double u_ref, const VehicleState& ego,
                                     const VehicleState* leader, const SafetyParams& params,
                                     const MotionBounds& bounds) {
    SafetyResult res;
    if (leader == nullptr) {
        res.accel = std::clamp(u_ref, bounds.u_min, bounds.u_max);
        return res;
    }
    double h = leader->pos - ego.pos - params.standstill - ego.speed * params.headway;
    double cap = (leader->speed - ego.speed + params.barrier_rate * h) / params.headway;
    double u = u_ref;
    if (cap < u) {
        u = cap;
        res.constrained = true;
    }
    if (cap < bounds.u_min) res.infeasible = true;
    res.accel = std::clamp(u, bounds.u_min, bounds.u_max);
    return res;
}

ReplanResult check_and_replan(const TrajectoryPlan& plan, const CrossingAssignment& current,
                              double now, double pos, double speed,
                              double fresh_earliest, double fresh_predecessor_crossing,
                              std::span<const TimeInterval> greens,
                              const SafetyParams& params, const MotionBounds& bounds) {
    ReplanResult result;
    double t_eval = std::clamp(now, plan.start_time, plan.end_time);
    double deviation = std::abs(pos - plan.pos(t_eval));
    if (deviation <= params.replan_threshold) {
        result.action = ReplanAction::Keep;
        return result;
    }

    double bound = std::max(fresh_earliest, fresh_predecessor_crossing + params.headway);
    bool still_admissible = current.crossing_time >= bound &&
                            current.crossing_time <= current.interval.end &&
                            current.crossing_time > now;
    if (still_admissible) {
        auto refreshed = plan_energy_optimal(now, current.crossing_time, pos, speed,
                                             plan.end_pos, bounds);
        if (refreshed) {
            result.action = ReplanAction::Refresh;
            result.plan = std::move(refreshed);
            return result;
        }
    }

    auto reselected =
        select_crossing_time(greens, fresh_earliest, fresh_predecessor_crossing, params.headway);
    if (!reselected) {
        result.action = ReplanAction::Defer;
        return result;
    }
    auto new_plan = plan_energy_optimal(now, reselected->crossing_time, pos, speed,
                                        plan.end_pos, bounds);
    if (!new_plan) {
        result.action = ReplanAction::Defer;
        result.assignment = reselected;
        return result;
    }
    result.action = ReplanAction::Reselect;
    result.assignment = reselected;
    result.plan = std::move(new_plan);
    return result;
}

}  // namespace mtsim
