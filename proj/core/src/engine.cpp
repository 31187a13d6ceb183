#include "mtsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <set>

#include "mtsim/cav.hpp"
#include "mtsim/dynamics.hpp"
#include "mtsim/routing.hpp"
#include "mtsim/rng.hpp"

namespace mtsim {

std::vector<SpawnRecord> generate_demand(const ScenarioConfig& config) {
    std::vector<SpawnRecord> table;
    double pen = config.effective_penetration();
    for (int i = 0; i < int(config.demand.size()); ++i) {
        const DemandEntry& od = config.demand[i];
        if (od.rate_veh_h <= 0.0) continue;
        Rng rng(Rng::mix(config.seed, std::uint64_t(i) + 1));
        double headway = 3600.0 / od.rate_veh_h;
        double t = 0.0;
        while (true) {
            double jitter = config.headway_jitter * (2.0 * rng.next_double() - 1.0);
            t += headway * (1.0 + jitter);
            bool is_cav = rng.next_double() < pen;
            if (t >= config.duration) break;
            table.push_back({t, od.origin, od.destination, is_cav, i, 0});
        }
    }
    std::stable_sort(table.begin(), table.end(), [](const SpawnRecord& a, const SpawnRecord& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.od_index < b.od_index;
    });
    for (int s = 0; s < int(table.size()); ++s) table[s].seq = s;
    return table;
}

std::map<NodeId, PhaseSchedule> fixed_time_plans(const NetworkGraph& network, double green,
                                                 double h_c) {
    std::map<NodeId, PhaseSchedule> out;
    for (const IntersectionSpec& spec : network.intersections) {
        int m = spec.num_phases();
        if (m == 0) continue;
        std::vector<double> eta(2 * m, green);
        out[spec.node] = make_schedule(0.0, m, eta, h_c);
    }
    return out;
}

namespace {

struct PendingEntry {
    VehicleId vehicle = 0;
    double ready_time = 0.0;
};

constexpr double kNoPredecessor = -1e18;

}  // namespace

struct Simulation::Impl {
    ScenarioConfig cfg;
    NetworkGraph net;

    struct LinkRt {
        const LinkSpec* spec = nullptr;
        int edge_idx = 0;
        int controller = -1;  // index into controllers, -1 unsignalized
        int phase_index = -1;
        double zone = 200.0;
        std::vector<VehicleId> order;  // front (closest to stop line) first
        std::deque<PendingEntry> pending;
        std::vector<TimeInterval> greens_ext;
        int broadcast_seq = 0;
        bool has_room = true;
        // rollout cache for HDV crossing estimates
        int rollout_seq = -1;
        double rollout_time = -1e18;
        std::map<VehicleId, double> rollout;
    };

    struct Veh {
        VehicleState st;
        std::vector<LinkId> route;
        int route_pos = 0;
        NodeId origin = 0, destination = 0;
        double spawn_time = 0.0;
        double link_entry_time = 0.0;
        bool in_network = false;
        bool placed = false;  // physically on the link (not pending)
        // CAV control state
        bool has_assignment = false;
        CrossingAssignment assignment;
        TrajectoryPlan plan;
        bool stop_plan = false;
        int assignment_seq = -1;
        double next_retry = 0.0;
    };

    std::vector<LinkRt> links;  // parallel to net.links
    std::vector<IntersectionController> controllers;
    std::vector<std::vector<int>> controller_links;  // incoming link indices
    std::vector<Veh> vehicles;
    std::vector<SpawnRecord> spawn_table;
    size_t next_spawn = 0;

    std::unique_ptr<Router> router;
    std::vector<TraversalEvent> traversal_buffer;
    std::map<std::pair<NodeId, NodeId>, PathSet> path_sets;

    MetricsLog log;
    std::vector<double> edge_bin_sum;
    long long crossings_total = 0;
    double last_progress = 0.0;

    char fmt[320];

    explicit Impl(const ScenarioConfig& config, const NetworkGraph* prebuilt)
        : cfg(config) {
        cfg.validate();
        if (prebuilt != nullptr) {
            net = *prebuilt;
        } else if (!cfg.network_file.empty()) {
            net = load_network_file(cfg.network_file);
        } else {
            net = load_network_file(default_network_path());
        }
        net.build_index();
        init();
    }

    void init() {
        // per-link runtime
        links.resize(net.links.size());
        std::map<NodeId, int> ctrl_of_node;
        for (const IntersectionSpec& spec : net.intersections) {
            if (spec.num_phases() == 0) continue;
            ctrl_of_node[spec.node] = int(controllers.size());
            controllers.emplace_back(spec, cfg.signal,
                                     /*fixed_time=*/!cfg.optimize_signals());
            controller_links.emplace_back();
        }
        for (size_t i = 0; i < net.links.size(); ++i) {
            LinkRt& rt = links[i];
            rt.spec = &net.links[i];
            rt.edge_idx = int(i);
            auto it = ctrl_of_node.find(rt.spec->to);
            if (it != ctrl_of_node.end()) {
                rt.controller = it->second;
                const IntersectionSpec& spec = controllers[it->second].spec();
                rt.phase_index = spec.phase_of(rt.spec->id);
                rt.zone = std::min(spec.control_zone_m, rt.spec->length_m);
                controller_links[it->second].push_back(int(i));
            } else {
                rt.zone = std::min(cfg.control_zone, rt.spec->length_m);
                // unsignalized: permanently crossable
                rt.greens_ext.push_back({0.0, 1e15, false});
            }
        }
        for (auto& v : controller_links) std::sort(v.begin(), v.end());

        // candidate paths per OD pair
        for (const DemandEntry& d : cfg.demand) {
            auto key = std::make_pair(d.origin, d.destination);
            if (!path_sets.count(key)) {
                path_sets[key] = k_shortest_paths(net, d.origin, d.destination, cfg.k_paths,
                                                  cfg.junction_time);
            }
        }

        if (cfg.route_cavs()) {
            RoutingParams rp = cfg.routing;
            rp.edge_time_offset = cfg.junction_time;
            router = std::make_unique<Router>(net, rp, cfg.duration);
        }
        spawn_table = generate_demand(cfg);

        log.bin_width = cfg.routing.bin_width;
        log.duration = cfg.duration;
        for (const LinkSpec& l : net.links) log.edge_ids.push_back(l.id);
        log.edge_volume.assign(net.links.size(), 0);
        edge_bin_sum.assign(net.links.size(), 0.0);
    }

    // --- event formatting -------------------------------------------------

    void event(const char* body, double t) {
        std::snprintf(fmt, sizeof(fmt), "{\"t\":%.3f,%s}", t, body);
        log.events.push_back(fmt);
    }

    void event_vehicle(double t, const char* type, const Veh& v) {
        char body[200];
        std::snprintf(body, sizeof(body),
                      "\"ev\":\"%s\",\"veh\":%d,\"cls\":\"%s\",\"link\":%d", type, v.st.id,
                      v.st.cls == VehicleClass::CAV ? "CAV" : "HDV", v.st.link);
        event(body, t);
    }

    // --- helpers ----------------------------------------------------------

    int link_index(LinkId id) const {
        return int(net.link_by_id(id) - net.links.data());
    }

    Veh& veh(VehicleId id) { return vehicles[size_t(id)]; }

    bool in_zone(const LinkRt& rt, const VehicleState& st) const {
        return st.pos >= -rt.zone;
    }

    int on_edge_count(const LinkRt& rt) const {
        return int(rt.order.size() + rt.pending.size());
    }

    double room_gap() const { return cfg.idm.s0 + 0.5; }

    void refresh_room(LinkRt& rt) {
        // pending occupants claim slots at the upstream end
        double available = rt.order.empty()
                               ? rt.spec->length_m
                               : veh(rt.order.back()).st.pos + rt.spec->length_m;
        rt.has_room = available > double(rt.pending.size() + 1) * room_gap();
    }

    const PathSet& paths_for(NodeId o, NodeId d) {
        auto key = std::make_pair(o, d);
        auto it = path_sets.find(key);
        if (it == path_sets.end()) {
            it = path_sets.emplace(key, k_shortest_paths(net, o, d, cfg.k_paths,
                                                         cfg.junction_time)).first;
        }
        return it->second;
    }

    // --- signal layer -----------------------------------------------------

    LinkQueueSnapshot snapshot(const LinkRt& rt, int ctrl_idx) const {
        LinkQueueSnapshot q;
        q.link = rt.spec->id;
        q.phase_index = rt.phase_index;
        q.mean_green = controllers[ctrl_idx].mean_green(rt.spec->id);
        q.ref_speed = rt.spec->vmax_mps;
        for (VehicleId id : rt.order) {
            const VehicleState& st = vehicles[size_t(id)].st;
            if (st.pos >= -rt.zone && st.pos < 0.0) {
                q.vehicles.push_back({-st.pos, st.speed, st.cls, id});
            }
        }
        return q;
    }

    void update_controller(int c, double t) {
        std::vector<LinkQueueSnapshot> queues;
        for (int li : controller_links[c]) queues.push_back(snapshot(links[li], c));
        BroadcastRecord rec = controllers[c].receding_horizon_update(t, queues);

        for (int li : controller_links[c]) {
            LinkRt& rt = links[li];
            rt.greens_ext = green_intervals_extended(rec.schedule, rt.phase_index,
                                                     controllers[c].mean_green(rt.spec->id));
            ++rt.broadcast_seq;
            rt.rollout_seq = -1;  // invalidate crossing estimates
        }

        char body[220];
        std::string etas;
        char num[32];
        for (double e : rec.schedule.green) {
            std::snprintf(num, sizeof(num), etas.empty() ? "%.1f" : ",%.1f", e);
            etas += num;
        }
        std::snprintf(body, sizeof(body),
                      "\"ev\":\"broadcast\",\"node\":%d,\"eta\":[%s],\"obj\":%.3f",
                      rec.intersection, etas.c_str(), rec.plan.objective);
        event(body, t);
    }

    // crossing-time estimates for every vehicle ahead of the rearmost
    // in-zone CAV, from a forward IDM rollout against the published greens
    void refresh_rollout(LinkRt& rt, double t) {
        if (rt.rollout_seq == rt.broadcast_seq && t - rt.rollout_time < 1.0) return;
        rt.rollout.clear();
        int last_cav = -1;
        for (int i = 0; i < int(rt.order.size()); ++i) {
            const Veh& v = veh(rt.order[i]);
            if (v.st.cls == VehicleClass::CAV && in_zone(rt, v.st)) last_cav = i;
        }
        if (last_cav <= 0) {  // nothing to estimate: no CAV or CAV leads
            rt.rollout_seq = rt.broadcast_seq;
            rt.rollout_time = t;
            return;
        }
        std::vector<VehicleState> fleet;
        for (int i = 0; i < last_cav; ++i) fleet.push_back(veh(rt.order[i]).st);
        RolloutParams rp;
        rp.idm = cfg.idm;
        rp.bounds = cfg.bounds;
        rp.stop_margin = cfg.stop_margin;
        rp.commit_margin = cfg.commit_margin;
        rp.ref_speed = rt.spec->vmax_mps;
        double horizon = 30.0;
        if (!rt.greens_ext.empty() && rt.greens_ext.back().end < 1e14) {
            horizon = std::min(180.0, std::max(30.0, rt.greens_ext.back().end - t + 10.0));
        }
        rt.rollout = predict_hdv_crossings(fleet, rt.greens_ext, t, horizon, cfg.dt, rp);
        rt.rollout_seq = rt.broadcast_seq;
        rt.rollout_time = t;
    }

    double predecessor_bound(LinkRt& rt, int idx, double t) {
        if (idx <= 0) return kNoPredecessor;
        const Veh& pred = veh(rt.order[idx - 1]);
        if (pred.st.cls == VehicleClass::CAV && pred.has_assignment) {
            return pred.assignment.crossing_time;
        }
        refresh_rollout(rt, t);
        auto it = rt.rollout.find(pred.st.id);
        if (it != rt.rollout.end()) return it->second;
        // estimate unavailable (pred beyond the rollout prefix): free-flow fallback
        return t + (-pred.st.pos) / rt.spec->vmax_mps;
    }

    // --- CAV pipeline -----------------------------------------------------

    void select_for(Veh& v, LinkRt& rt, int idx, double t) {
        bool was_stopped = v.stop_plan;
        v.has_assignment = false;
        v.stop_plan = false;
        v.next_retry = t + 1.0;
        double dist = -v.st.pos;
        double t_min = earliest_arrival_time(t, dist, v.st.speed, cfg.bounds.v_max,
                                             cfg.bounds.u_max);
        DurationWindow win = feasible_duration_window(dist, v.st.speed, cfg.bounds);
        double pred = predecessor_bound(rt, idx, t);
        double lower = std::max(t_min, t + win.lo);
        auto pick = select_crossing_time(rt.greens_ext, lower, pred, cfg.safety.headway);
        if (pick && pick->crossing_time <= t + win.hi) {
            auto plan = plan_energy_optimal(t, pick->crossing_time, v.st.pos, v.st.speed, 0.0,
                                            cfg.bounds);
            if (plan) {
                pick->earliest = t_min;
                v.assignment = *pick;
                v.plan = *plan;
                v.has_assignment = true;
                v.assignment_seq = rt.broadcast_seq;
                if (pick->projected) ++log.crossing_deferrals;
                char body[220];
                std::snprintf(body, sizeof(body),
                              "\"ev\":\"plan\",\"veh\":%d,\"t_cr\":%.3f,\"phi\":[%.9g,%.9g,%.9g,%.9g]",
                              v.st.id, pick->crossing_time, v.plan.c3, v.plan.c2, v.plan.c1,
                              v.plan.c0);
                event(body, t);
                return;
            }
        }
        // no reachable crossing: smooth stop at the line, retry shortly
        v.plan = plan_stop(t, v.st.pos, v.st.speed, -cfg.stop_margin);
        v.stop_plan = true;
        v.assignment_seq = rt.broadcast_seq;
        ++log.crossing_deferrals;
        if (!was_stopped) event_vehicle(t, "defer", v);
    }

    // periodic check: re-select when the assignment was missed or a clearly
    // earlier crossing has become available (e.g. the queue ahead cleared
    // faster than estimated)
    void reconsider(Veh& v, LinkRt& rt, int idx, double t) {
        v.next_retry = t + 1.0;
        if (t > v.assignment.interval.end || v.assignment.crossing_time < t) {
            select_for(v, rt, idx, t);
            return;
        }
        double dist = -v.st.pos;
        double t_min = earliest_arrival_time(t, dist, v.st.speed, cfg.bounds.v_max,
                                             cfg.bounds.u_max);
        DurationWindow win = feasible_duration_window(dist, v.st.speed, cfg.bounds);
        double pred = predecessor_bound(rt, idx, t);
        double lower = std::max({t_min, t + win.lo, pred + cfg.safety.headway});
        if (lower + 2.0 < v.assignment.crossing_time) {
            auto pick = select_crossing_time(rt.greens_ext, std::max(t_min, t + win.lo), pred,
                                             cfg.safety.headway);
            if (pick && pick->crossing_time + 2.0 < v.assignment.crossing_time &&
                pick->crossing_time <= t + win.hi) {
                select_for(v, rt, idx, t);
            }
        }
    }

    void maybe_replan(Veh& v, LinkRt& rt, int idx, double t) {
        double t_eval = std::clamp(t, v.plan.start_time, v.plan.end_time);
        if (std::abs(v.st.pos - v.plan.pos(t_eval)) <= cfg.safety.replan_threshold) return;
        double dist = -v.st.pos;
        double t_min = earliest_arrival_time(t, dist, v.st.speed, cfg.bounds.v_max,
                                             cfg.bounds.u_max);
        double pred = predecessor_bound(rt, idx, t);
        ReplanResult r = check_and_replan(v.plan, v.assignment, t, v.st.pos, v.st.speed, t_min,
                                          pred, rt.greens_ext, cfg.safety, cfg.bounds);
        ++log.replans;
        switch (r.action) {
            case ReplanAction::Keep:
                break;
            case ReplanAction::Refresh:
                v.plan = *r.plan;
                event_vehicle(t, "replan", v);
                break;
            case ReplanAction::Reselect:
                v.assignment = *r.assignment;
                v.plan = *r.plan;
                if (v.assignment.projected) ++log.crossing_deferrals;
                event_vehicle(t, "replan", v);
                break;
            case ReplanAction::Defer:
                v.plan = plan_stop(t, v.st.pos, v.st.speed, -cfg.stop_margin);
                v.stop_plan = true;
                v.has_assignment = false;
                v.next_retry = t + 1.0;
                ++log.crossing_deferrals;
                event_vehicle(t, "defer", v);
                break;
        }
    }

    // --- per-step main passes ----------------------------------------------

    void place_entries(double t) {
        for (LinkRt& rt : links) {
            while (!rt.pending.empty()) {
                PendingEntry pe = rt.pending.front();
                if (pe.ready_time > t + 1e-9) break;
                double length = rt.spec->length_m;
                double gap = rt.order.empty()
                                 ? kInfiniteGap
                                 : veh(rt.order.back()).st.pos + length;
                if (gap <= room_gap()) break;  // blocked, stays pending
                Veh& v = veh(pe.vehicle);
                double fit = std::max(0.0, (gap - cfg.idm.s0) / cfg.idm.T);
                v.st.pos = -length;
                v.st.speed = std::min({v.st.speed, fit, rt.spec->vmax_mps});
                v.placed = true;
                rt.order.push_back(pe.vehicle);
                rt.pending.pop_front();
                event_vehicle(t, "enter", v);
            }
        }
    }

    void process_spawns(double t) {
        while (next_spawn < spawn_table.size() && spawn_table[next_spawn].time <= t + 1e-9) {
            const SpawnRecord& s = spawn_table[next_spawn];
            ++next_spawn;
            const PathSet& ps = paths_for(s.origin, s.destination);
            if (ps.unreachable || ps.paths.empty()) {
                char body[120];
                std::snprintf(body, sizeof(body),
                              "\"ev\":\"reject\",\"o\":%d,\"d\":%d", s.origin, s.destination);
                event(body, t);
                continue;
            }
            Veh v;
            v.st.id = int(vehicles.size());
            v.st.cls = s.is_cav ? VehicleClass::CAV : VehicleClass::HDV;
            v.origin = s.origin;
            v.destination = s.destination;
            v.spawn_time = t;
            v.st.speed = std::min(cfg.spawn_speed, cfg.bounds.v_max);

            int path_idx = 0;
            if (s.is_cav && cfg.route_cavs()) {
                RouteAssignment ra = router->assign_route(v.st.id, ps, t);
                path_idx = ra.path_index;
                double best_other = std::numeric_limits<double>::infinity();
                for (int p = 0; p < int(ra.candidate_costs.size()); ++p) {
                    if (p != ra.path_index) best_other = std::min(best_other,
                                                                  ra.candidate_costs[p]);
                }
                log.assignments.push_back({v.st.id, ra.path_index, ra.predicted_cost,
                                           best_other});
                char body[200];
                std::snprintf(body, sizeof(body),
                              "\"ev\":\"assign\",\"veh\":%d,\"path\":%d,\"mc\":%.3f",
                              v.st.id, ra.path_index, ra.predicted_cost);
                event(body, t);
            } else if (!s.is_cav && cfg.route_cavs()) {
                router->register_hdv(ps.paths[0], t);
            }
            v.route = ps.paths[path_idx].links;
            v.route_pos = 0;
            v.st.link = v.route[0];
            v.link_entry_time = t;
            v.in_network = true;
            ++log.spawned;

            LinkRt& first = links[link_index(v.route[0])];
            if (!first.pending.empty() || !first.has_room) ++log.deferred_spawns;
            vehicles.push_back(v);
            first.pending.push_back({v.st.id, t});
            ++log.edge_volume[first.edge_idx];
            event_vehicle(t, "spawn", vehicles.back());
        }
    }

    bool crossable_now(const LinkRt& rt, const VehicleState& st, double t) const {
        return signal_crossable(rt.greens_ext, t, -st.pos, st.speed, cfg.commit_margin,
                                cfg.idm);
    }

    // one link: controls + integration, front to back; leader view combines
    // the leader's pre-step position with its committed post-step speed
    void advance_link(LinkRt& rt, double t) {
        int crossed_prefix = 0;
        bool leader_valid = false;
        double leader_old_pos = 0.0, leader_new_speed = 0.0, leader_new_pos = 0.0;
        bool cav_modes = cfg.control_cavs();

        for (int i = 0; i < int(rt.order.size()); ++i) {
            Veh& v = veh(rt.order[i]);
            LeaderView pred;
            VehicleState pred_state;  // one-step speed prediction for the filter
            const VehicleState* pred_ptr = nullptr;
            if (leader_valid) {
                pred.gap = leader_old_pos - v.st.pos;
                pred.speed = leader_new_speed;
                pred_state = v.st;
                pred_state.pos = leader_old_pos;
                pred_state.speed = leader_new_speed;
                pred_ptr = &pred_state;
            }

            bool blocked_downstream = false;
            if (v.route_pos + 1 < int(v.route.size())) {
                blocked_downstream = !links[link_index(v.route[v.route_pos + 1])].has_room;
            }
            bool crossable = !blocked_downstream && crossable_now(rt, v.st, t);

            double u = 0.0;
            bool cav_controlled = cav_modes && v.st.cls == VehicleClass::CAV &&
                                  rt.controller >= 0 && in_zone(rt, v.st);
            if (cav_controlled) {
                if (!v.has_assignment && !v.stop_plan) {
                    select_for(v, rt, i, t);
                } else if (v.assignment_seq != rt.broadcast_seq ||
                           (v.stop_plan && t >= v.next_retry)) {
                    select_for(v, rt, i, t);
                } else if (v.has_assignment) {
                    if (t >= v.next_retry) reconsider(v, rt, i, t);
                    if (v.has_assignment) maybe_replan(v, rt, i, t);
                }
                double u_ref = t <= v.plan.end_time ? v.plan.accel(t) : 0.0;
                SafetyResult sr = reactive_safety_control(u_ref, v.st, pred_ptr, cfg.safety,
                                                          cfg.bounds);
                if (sr.infeasible) ++log.safety_infeasible;
                u = sr.accel;
                // the stop-line ghost guards CAVs without a live plan and
                // planned ones that are about to miss their green; an
                // assignment into a projected (unpublished) green is an
                // estimate, not a permission
                bool ghost_on = blocked_downstream;
                if (!ghost_on) {
                    if (!v.has_assignment || v.assignment.interval.projected) {
                        ghost_on = !crossable;
                    } else if (t > v.assignment.interval.end) {
                        ghost_on = true;
                    } else if (t >= v.assignment.interval.begin) {
                        double eta = -v.st.pos / std::max(v.st.speed, 0.5);
                        ghost_on = t + std::min(eta, 30.0) + cfg.commit_margin >
                                   v.assignment.interval.end + 1e-9 &&
                                   v.assignment.crossing_time <
                                       v.assignment.interval.end - 1e-9;
                    }
                }
                if (ghost_on) {
                    VehicleState ghost;
                    ghost.pos = cfg.safety.standstill - cfg.stop_margin;
                    ghost.speed = 0.0;
                    SafetyResult sg = reactive_safety_control(u, v.st, &ghost, cfg.safety,
                                                              cfg.bounds);
                    if (sg.infeasible) ++log.safety_infeasible;
                    u = sg.accel;
                }
            } else {
                LeaderView view = virtual_leader_for_signal(v.st, crossable, cfg.stop_margin,
                                                            pred);
                HdvParams idm = cfg.idm;
                idm.v_des = std::min(idm.v_des, rt.spec->vmax_mps);
                u = idm_acceleration(v.st.speed, view.gap, view.speed, idm, cfg.bounds);
            }

            VehicleState before = v.st;
            v.st = step_vehicle(v.st, u, cfg.dt, cfg.bounds);

            // keep strict ordering (counted as a contact if it ever binds)
            if (leader_valid && v.st.pos >= leader_new_pos) {
                v.st.pos = leader_new_pos - 0.01;
                ++log.contact_events;
            }

            leader_valid = true;
            leader_old_pos = before.pos;
            leader_new_speed = v.st.speed;
            leader_new_pos = v.st.pos;

            if (v.st.pos >= 0.0 && i == crossed_prefix) {
                ++crossed_prefix;
            }
        }

        if (crossed_prefix > 0) handle_crossings(rt, crossed_prefix, t);
    }

    void handle_crossings(LinkRt& rt, int count, double t) {
        for (int i = 0; i < count; ++i) {
            VehicleId id = rt.order[size_t(i)];
            Veh& v = veh(id);
            double frac = v.st.speed > 1e-9
                              ? std::clamp(1.0 - v.st.pos / (v.st.speed * cfg.dt), 0.0, 1.0)
                              : 1.0;
            double t_cross = t + frac * cfg.dt;
            ++crossings_total;

            if (rt.controller >= 0) check_legality(rt, v, t_cross);

            traversal_buffer.push_back({rt.edge_idx, v.link_entry_time, t_cross});

            char body[160];
            std::snprintf(body, sizeof(body),
                          "\"ev\":\"cross\",\"veh\":%d,\"link\":%d,\"tx\":%.3f", id,
                          rt.spec->id, t_cross);
            event(body, t);

            v.has_assignment = false;
            v.stop_plan = false;
            ++v.route_pos;
            if (v.route_pos >= int(v.route.size())) {
                v.in_network = false;
                v.placed = false;
                ++log.arrived;
                auto& stat = log.od_times[{v.origin, v.destination}];
                stat.total_time += t_cross - v.spawn_time;
                stat.trips += 1;
                event_vehicle(t, "arrive", v);
            } else {
                LinkId next_id = v.route[v.route_pos];
                LinkRt& next = links[link_index(next_id)];
                v.st.link = next_id;
                v.st.pos = -next.spec->length_m;
                v.placed = false;
                v.link_entry_time = t_cross;
                next.pending.push_back({id, t_cross + cfg.junction_time});
                ++log.edge_volume[next.edge_idx];
            }
        }
        rt.order.erase(rt.order.begin(), rt.order.begin() + count);
    }

    void check_legality(const LinkRt& rt, const Veh& v, double t_cross) {
        const PhaseSchedule& sched = controllers[rt.controller].schedule();
        auto greens = green_intervals_for_link(sched, rt.phase_index);
        for (const TimeInterval& g : greens) {
            if (t_cross >= g.begin - cfg.dt && t_cross <= g.end + cfg.dt) return;
        }
        ++log.signal_violations;
        char body[160];
        std::snprintf(body, sizeof(body),
                      "\"ev\":\"red_crossing\",\"veh\":%d,\"link\":%d,\"tx\":%.3f", v.st.id,
                      rt.spec->id, t_cross);
        event(body, t_cross);
    }

    void sample_bin(double t) {
        long long in_net = 0;
        for (size_t e = 0; e < links.size(); ++e) {
            int c = on_edge_count(links[e]);
            edge_bin_sum[e] += c;
            in_net += c;
        }
        log.accumulation.push_back(int(in_net));
        log.peak_accumulation = std::max(log.peak_accumulation, int(in_net));
        if (log.spawned != in_net + log.arrived) log.conservation_ok = false;
    }

    void macro_update(double t) {
        if (!router) return;
        std::vector<int> counts(links.size(), 0);
        for (size_t e = 0; e < links.size(); ++e) counts[e] = on_edge_count(links[e]);
        router->update_measurements(t, traversal_buffer, counts);
        traversal_buffer.clear();
        if (!cfg.routing.debug_dump_dir.empty()) {
            namespace fs = std::filesystem;
            fs::create_directories(cfg.routing.debug_dump_dir);
            char name[64];
            std::snprintf(name, sizeof(name), "router_%07.1f.txt", t);
            std::ofstream out(fs::path(cfg.routing.debug_dump_dir) / name,
                              std::ios::binary);
            out << router->dump_state();
        }
    }

    MetricsLog run() {
        int steps = int(std::llround(cfg.duration / cfg.dt));
        int bin_steps = std::max(1, int(std::llround(log.bin_width / cfg.dt)));
        int macro_steps = std::max(1, int(std::llround(cfg.macro_step / cfg.dt)));
        last_progress = 0.0;
        long long last_crossings = -1;

        for (int k = 0; k < steps; ++k) {
            double t = k * cfg.dt;
            if (k % bin_steps == 0) sample_bin(t);
            if (k % macro_steps == 0) macro_update(t);
            for (int c = 0; c < int(controllers.size()); ++c) {
                if (t >= controllers[c].next_update_time() - 1e-9) update_controller(c, t);
            }
            process_spawns(t);
            for (LinkRt& rt : links) refresh_room(rt);
            place_entries(t);
            for (LinkRt& rt : links) advance_link(rt, t);

            if (crossings_total != last_crossings) {
                last_crossings = crossings_total;
                last_progress = t;
            } else if (log.spawned - log.arrived > 0 &&
                       t - last_progress > cfg.gridlock_timeout) {
                throw std::runtime_error(
                    "gridlock watchdog: no stop-line crossing for " +
                    std::to_string(int(cfg.gridlock_timeout)) + " s with " +
                    std::to_string(log.spawned - log.arrived) + " vehicles in the network");
            }
        }

        int bins = int(log.accumulation.size());
        double acc_sum = 0.0;
        for (int b : log.accumulation) acc_sum += b;
        log.ttt_accumulation = acc_sum * log.bin_width;
        double edge_sum = 0.0;
        for (double s : edge_bin_sum) edge_sum += s;
        log.ttt_edge_bins = edge_sum * log.bin_width;
        log.edge_time_avg.assign(links.size(), 0.0);
        for (size_t e = 0; e < links.size(); ++e) {
            log.edge_time_avg[e] = bins > 0 ? edge_bin_sum[e] / bins : 0.0;
        }
        return log;
    }
};

Simulation::Simulation(const ScenarioConfig& config)
    : impl_(std::make_unique<Impl>(config, nullptr)) {}

Simulation::Simulation(const ScenarioConfig& config, const NetworkGraph& network)
    : impl_(std::make_unique<Impl>(config, &network)) {}

Simulation::~Simulation() = default;

MetricsLog Simulation::run() { return impl_->run(); }

MetricsLog run_simulation(const ScenarioConfig& config) {
    Simulation sim(config);
    return sim.run();
}

}  // namespace mtsim
