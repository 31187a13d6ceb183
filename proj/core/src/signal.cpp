#include "mtsim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mtsim {

double PhaseSchedule::next_cycle_time() const {
    if (phase.empty()) return start_time;
    // step M starts the second cycle
    return start_time + green_start[num_phases];
}

std::pair<std::vector<double>, std::vector<double>>
compute_phase_timing(const std::vector<double>& eta, double h_c) {
    std::vector<double> tau(eta.size(), 0.0), theta(eta.size(), 0.0);
    for (size_t h = 0; h < eta.size(); ++h) {
        tau[h] = h == 0 ? 0.0 : theta[h - 1] + h_c;
        theta[h] = tau[h] + eta[h];
    }
    return {tau, theta};
}

PhaseSchedule make_schedule(double start_time, int num_phases,
                            const std::vector<double>& eta, double h_c) {
    PhaseSchedule s;
    s.start_time = start_time;
    s.num_phases = num_phases;
    s.clearance = h_c;
    s.green = eta;
    auto [tau, theta] = compute_phase_timing(eta, h_c);
    s.green_start = std::move(tau);
    s.green_end = std::move(theta);
    s.phase.resize(eta.size());
    for (int h = 0; h < int(eta.size()); ++h) s.phase[h] = h % num_phases;
    s.active_phase = s.phase.empty() ? 0 : s.phase[0];
    s.remaining = s.green.empty() ? 0.0 : s.green[0];
    return s;
}

std::vector<double> free_flow_crossing_times(const LinkQueueSnapshot& queue,
                                             const CrossingParams& params) {
    std::vector<double> out;
    out.reserve(queue.vehicles.size());
    for (size_t i = 0; i < queue.vehicles.size(); ++i) {
        const QueuedVehicle& veh = queue.vehicles[i];
        double startup = veh.speed < params.startup_speed ? params.startup_delay : 0.0;
        double t = veh.dist_to_stop / queue.ref_speed + startup;
        if (i > 0) t = std::max(t, out[i - 1] + params.headway);
        out.push_back(t);
    }
    return out;
}

namespace {

// beyond-horizon projection: mean green times the phase distance from the
// last horizon step. The last phase itself recurs a full cycle later (its
// in-horizon slot ends exactly at the horizon end).
double horizon_offset(const PhaseSchedule& s, int phase_index, double mean_green) {
    int last_phase = s.phase.back();
    int dist = pos_mod(phase_index - last_phase, s.num_phases);
    if (dist == 0) dist = s.num_phases;
    return mean_green * dist;
}

// The schedule beyond the horizon is approximated by repeating the phase
// sequence with mean-green-wide windows: green j of the link's phase spans
// [base + j*cycle, base + j*cycle + w] with base = theta_2M + Delta(pi(l)).
// Finite projected capacity is what keeps unserved queues from looking free
// to the optimizer.
struct HorizonProjection {
    double base = 0.0;
    double width = 0.0;
    double cycle = 1.0;

    HorizonProjection(const PhaseSchedule& s, int phase_index, double mean_green) {
        double w = std::max(0.0, mean_green);
        base = s.horizon_end() + horizon_offset(s, phase_index, w);
        width = w;
        cycle = std::max(1.0, s.num_phases * (w + s.clearance));
    }

    // earliest admissible instant >= r inside a projected green
    double crossing(double r) const {
        if (r <= base + width) return std::max(base, r);
        double j = std::ceil((r - base - width) / cycle);
        double start = base + j * cycle;
        return std::max(start, r);
    }
};

}  // namespace

std::vector<double> signalized_crossing_times(const LinkQueueSnapshot& queue,
                                              const PhaseSchedule& schedule,
                                              const CrossingParams& params,
                                              const std::vector<double>& free_times) {
    std::vector<double> out;
    out.reserve(queue.vehicles.size());
    HorizonProjection proj(schedule, queue.phase_index, queue.mean_green);
    for (size_t i = 0; i < queue.vehicles.size(); ++i) {
        double r = free_times[i];
        if (i > 0) r = std::max(r, out[i - 1] + params.headway);

        double assigned = std::numeric_limits<double>::quiet_NaN();
        double next_start = std::numeric_limits<double>::infinity();
        for (int h = 0; h < schedule.steps(); ++h) {
            if (schedule.phase[h] != queue.phase_index) continue;
            if (schedule.green[h] <= 0.0) continue;  // skipped phases offer no crossing
            if (schedule.green_start[h] <= r && r <= schedule.green_end[h]) {
                assigned = r;
                break;
            }
            if (schedule.green_start[h] > r) {
                next_start = std::min(next_start, schedule.green_start[h]);
            }
        }
        if (std::isnan(assigned)) {
            assigned = std::isfinite(next_start) ? next_start : proj.crossing(r);
        }
        // the crossing cannot precede the reference time
        out.push_back(std::max(assigned, r));
    }
    return out;
}

std::vector<double> estimated_delays(const LinkQueueSnapshot& queue,
                                     const PhaseSchedule& schedule,
                                     const CrossingParams& params) {
    std::vector<double> free_times = free_flow_crossing_times(queue, params);
    std::vector<double> sig = signalized_crossing_times(queue, schedule, params, free_times);
    std::vector<double> d(sig.size());
    for (size_t i = 0; i < sig.size(); ++i) d[i] = sig[i] - free_times[i];
    return d;
}

std::vector<double> green_durations_from_counts(const DischargePlan& plan,
                                                const IntersectionSpec& spec) {
    int steps = int(plan.lost_time.size());
    int m = spec.num_phases();
    std::vector<double> eta(steps, 0.0);
    for (int h = 0; h < steps; ++h) {
        int served_max = 0;
        for (LinkId l : spec.phases[h % m]) {
            auto it = plan.counts.find(l);
            if (it != plan.counts.end()) served_max = std::max(served_max, it->second[h]);
        }
        eta[h] = served_max * spec.saturation_headway_s + plan.lost_time[h];
    }
    return eta;
}

namespace {

struct ObjectiveContext {
    const IntersectionSpec* spec;
    const std::vector<LinkQueueSnapshot>* queues;
    const SignalParams* params;
    std::vector<std::vector<double>> free_times;  // per queue
};

double evaluate_counts(const ObjectiveContext& ctx, const std::vector<int>& step_count) {
    int m = ctx.spec->num_phases();
    int steps = int(step_count.size());
    std::vector<double> eta(steps, 0.0);
    for (int h = 0; h < steps; ++h) {
        double lost = step_count[h] > 0 ? ctx.params->lost_time : 0.0;
        eta[h] = step_count[h] * ctx.spec->saturation_headway_s + lost;
    }
    PhaseSchedule sched = make_schedule(0.0, m, eta, ctx.spec->clearance_s);
    double total = 0.0;
    for (size_t q = 0; q < ctx.queues->size(); ++q) {
        const LinkQueueSnapshot& queue = (*ctx.queues)[q];
        auto sig = signalized_crossing_times(queue, sched, ctx.params->crossing,
                                             ctx.free_times[q]);
        for (size_t i = 0; i < sig.size(); ++i) total += sig[i] - ctx.free_times[q][i];
    }
    return total;
}

}  // namespace

DischargePlan optimize_discharge(const IntersectionSpec& spec,
                                 const std::vector<LinkQueueSnapshot>& queues,
                                 const std::map<LinkId, std::vector<int>>& committed,
                                 const SignalParams& params) {
    int m = spec.num_phases();
    int steps = 2 * m;

    // committed plan must satisfy phase compatibility and the cap
    std::vector<int> step_count(steps, 0);
    for (const auto& [link, counts] : committed) {
        if (int(counts.size()) < m) {
            throw std::invalid_argument("committed plan must cover the first cycle");
        }
        int phase = spec.phase_of(link);
        for (int h = 0; h < m; ++h) {
            if (counts[h] < 0 || counts[h] > params.n_max) {
                throw std::invalid_argument("committed plan violates capacity bound (link " +
                                            std::to_string(link) + ")");
            }
            if (counts[h] > 0 && phase != h % m) {
                throw std::invalid_argument(
                    "committed plan violates phase compatibility (link " +
                    std::to_string(link) + ")");
            }
            step_count[h] = std::max(step_count[h], counts[h]);
        }
    }

    ObjectiveContext ctx{&spec, &queues, &params, {}};
    ctx.free_times.reserve(queues.size());
    for (const auto& q : queues) {
        ctx.free_times.push_back(free_flow_crossing_times(q, params.crossing));
    }

    // one integer per free step: the objective depends on counts only
    // through the per-step served maximum
    std::vector<int> best(m, 0);
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<int> trial = step_count;
    std::vector<int> free_counts(m, 0);
    while (true) {
        for (int h = 0; h < m; ++h) trial[m + h] = free_counts[h];
        double obj = evaluate_counts(ctx, trial);
        if (obj < best_obj) {  // first hit in lexicographic order wins ties
            best_obj = obj;
            best = free_counts;
        }
        int pos = m - 1;
        while (pos >= 0 && free_counts[pos] == params.n_max) free_counts[pos--] = 0;
        if (pos < 0) break;
        ++free_counts[pos];
    }

    DischargePlan plan;
    plan.n_max = params.n_max;
    for (const auto& q : queues) plan.counts[q.link] = std::vector<int>(steps, 0);
    for (const auto& [link, counts] : committed) {
        auto& row = plan.counts[link];
        if (row.empty()) row.assign(steps, 0);
        for (int h = 0; h < m; ++h) row[h] = counts[h];
    }
    for (const auto& q : queues) {
        int phase = q.phase_index;
        for (int h = m; h < steps; ++h) {
            if (h % m == phase) plan.counts[q.link][h] = best[h - m];
        }
    }
    for (int h = 0; h < steps; ++h) trial[h] = h < m ? step_count[h] : best[h - m];
    plan.lost_time.resize(steps);
    plan.eta.resize(steps);
    for (int h = 0; h < steps; ++h) {
        plan.lost_time[h] = trial[h] > 0 ? params.lost_time : 0.0;
        plan.eta[h] = trial[h] * spec.saturation_headway_s + plan.lost_time[h];
    }
    plan.objective = best_obj;
    return plan;
}

std::vector<TimeInterval> green_intervals_for_link(const PhaseSchedule& schedule,
                                                   int phase_index) {
    std::vector<TimeInterval> out;
    if (phase_index < 0) {  // unsignalized: open from now on
        out.push_back({schedule.start_time, 1e15, false});
        return out;
    }
    for (int h = 0; h < schedule.steps(); ++h) {
        if (schedule.phase[h] != phase_index) continue;
        if (schedule.green[h] <= 0.0) continue;
        out.push_back({schedule.start_time + schedule.green_start[h],
                       schedule.start_time + schedule.green_end[h], false});
    }
    return out;
}

std::vector<TimeInterval> green_intervals_extended(const PhaseSchedule& schedule,
                                                   int phase_index, double mean_green) {
    std::vector<TimeInterval> out = green_intervals_for_link(schedule, phase_index);
    if (schedule.num_phases <= 0) return out;
    HorizonProjection proj(schedule, phase_index, std::max(mean_green, 2.0));
    for (int j = 0; j < 3; ++j) {
        double start = schedule.start_time + proj.base + j * proj.cycle;
        out.push_back({start, start + proj.width, true});
    }
    return out;
}

IntersectionController::IntersectionController(const IntersectionSpec& spec,
                                               const SignalParams& params, bool fixed_time)
    : spec_(spec), params_(params), fixed_time_(fixed_time) {
    for (const auto& phase : spec_.phases) {
        for (LinkId l : phase) {
            committed_[l] = std::vector<int>(spec_.num_phases(), 0);
            mean_green_[l] = params_.mean_green_init;
        }
    }
}

double IntersectionController::mean_green(LinkId link) const {
    auto it = mean_green_.find(link);
    return it == mean_green_.end() ? params_.mean_green_init : it->second;
}

BroadcastRecord IntersectionController::receding_horizon_update(
    double now, const std::vector<LinkQueueSnapshot>& queues) {
    if (has_schedule() && std::abs(now - next_update_) > 1e-6) {
        throw std::logic_error("receding_horizon_update invoked away from a cycle boundary");
    }
    int m = spec_.num_phases();
    int steps = 2 * m;

    // fold the just-executed cycle's realized greens into the per-link mean;
    // skipped (zero) slots are not greens and leave the average alone
    if (has_schedule()) {
        for (const auto& phase : spec_.phases) {
            for (LinkId l : phase) {
                int p = spec_.phase_of(l);
                double realized = schedule_.green[p];
                if (realized <= 0.0) continue;
                mean_green_[l] =
                    params_.mean_green_ema * realized +
                    (1.0 - params_.mean_green_ema) * mean_green_[l];
            }
        }
    }

    DischargePlan plan;
    if (fixed_time_) {
        plan.n_max = params_.n_max;
        plan.lost_time.assign(steps, 0.0);
        plan.eta.assign(steps, params_.fixed_green);
        for (auto& [l, row] : committed_) {
            plan.counts[l] = std::vector<int>(steps, 0);
        }
    } else {
        plan = optimize_discharge(spec_, queues, committed_, params_);
    }

    schedule_ = make_schedule(now, m, plan.eta, spec_.clearance_s);
    next_update_ = schedule_.next_cycle_time();

    // commit the optimized second cycle for the next invocation
    for (auto& [l, counts] : plan.counts) {
        auto& fixed = committed_[l];
        fixed.assign(m, 0);
        for (int h = 0; h < m; ++h) fixed[h] = counts[m + h];
    }

    BroadcastRecord rec;
    rec.intersection = spec_.node;
    rec.timestamp = now;
    rec.schedule = schedule_;
    rec.plan = std::move(plan);
    return rec;
}

}  // namespace mtsim
