#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtsim/rng.hpp"
#include "mtsim/signal.hpp"
#include "support/oracles.hpp"

using namespace mtsim;

namespace {

const CrossingParams kCrossing;  // h_f 2, startup 2 below 0.5 m/s

LinkQueueSnapshot queue_of(std::vector<std::pair<double, double>> dist_speed, int phase,
                           double mean_green = 10.0) {
    LinkQueueSnapshot q;
    q.link = 1;
    q.phase_index = phase;
    q.mean_green = mean_green;
    int id = 1;
    for (auto [d, v] : dist_speed) q.vehicles.push_back({d, v, VehicleClass::HDV, id++});
    return q;
}

IntersectionSpec two_phase_spec(std::vector<std::vector<LinkId>> phases) {
    IntersectionSpec s;
    s.node = 1;
    s.clearance_s = 3.0;
    s.saturation_headway_s = 2.0;
    s.phases = std::move(phases);
    return s;
}

}  // namespace

TEST_CASE("timing recursion worked example") {
    auto [tau, theta] = compute_phase_timing({10, 10, 10, 10}, 3.0);
    CHECK(tau == std::vector<double>{0, 13, 26, 39});
    CHECK(theta == std::vector<double>{10, 23, 36, 49});
}

TEST_CASE("timing recursion initialization") {
    auto [tau, theta] = compute_phase_timing({5}, 7.0);
    CHECK(tau == std::vector<double>{0});
    CHECK(theta == std::vector<double>{5});
}

TEST_CASE("zero-duration phase is allowed") {
    auto [tau, theta] = compute_phase_timing({0, 8}, 3.0);
    CHECK(tau == std::vector<double>{0, 3});
    CHECK(theta == std::vector<double>{0, 11});
}

TEST_CASE("timing identities hold to machine precision on random vectors") {
    Rng rng(4242);
    for (int trial = 0; trial < 1000; ++trial) {
        int steps = 1 + int(rng.next_u64() % 8);
        double h_c = rng.uniform(0.5, 6.0);
        std::vector<double> eta(steps);
        for (double& e : eta) e = rng.next_double() < 0.2 ? 0.0 : rng.uniform(0.0, 30.0);
        auto [tau, theta] = compute_phase_timing(eta, h_c);
        for (int h = 0; h < steps; ++h) {
            CHECK(theta[h] == tau[h] + eta[h]);  // exact
            if (h > 0) CHECK(tau[h] == theta[h - 1] + h_c);
        }
    }
}

TEST_CASE("free-flow crossing time of a single cruising vehicle") {
    auto q = queue_of({{138.9, 13.89}}, 0);
    auto t = free_flow_crossing_times(q, kCrossing);
    CHECK(t[0] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("headway binds the follower") {
    auto q = queue_of({{138.9, 13.89}, {145.0, 13.89}}, 0);
    auto t = free_flow_crossing_times(q, kCrossing);
    CHECK(t[0] == doctest::Approx(10.0));
    CHECK(t[1] == doctest::Approx(12.0));  // max(10.44, 12.0)
}

TEST_CASE("startup delay applies near standstill") {
    auto q = queue_of({{5.0, 0.0}}, 0);
    auto t = free_flow_crossing_times(q, kCrossing);
    CHECK(t[0] == doctest::Approx(5.0 / 13.89 + 2.0).epsilon(1e-9));
}

namespace {
// schedule of the worked branch examples: M=2, greens of phase 1 at [0,10], [26,36]
PhaseSchedule example_schedule() { return make_schedule(0.0, 2, {10, 10, 10, 10}, 3.0); }

double single_vehicle_sig(double target_free_time, const PhaseSchedule& s) {
    auto q = queue_of({{target_free_time * 13.89, 13.89}}, 0);
    auto free_times = free_flow_crossing_times(q, kCrossing);
    REQUIRE(free_times[0] == doctest::Approx(target_free_time).epsilon(1e-9));
    return signalized_crossing_times(q, s, kCrossing, free_times)[0];
}
}  // namespace

TEST_CASE("signalized crossing branch 1: reference inside green") {
    CHECK(single_vehicle_sig(5.0, example_schedule()) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("signalized crossing branch 2: next green start") {
    CHECK(single_vehicle_sig(15.0, example_schedule()) == doctest::Approx(26.0).epsilon(1e-9));
}

TEST_CASE("signalized crossing branch 3: beyond-horizon projection") {
    // theta_2M = 49, sigma(2M) = phase 2, pi(l) = phase 1, w_bar = 10:
    // 49 + 10 * ((1-2) mod 2) = 59
    CHECK(single_vehicle_sig(55.0, example_schedule()) == doctest::Approx(59.0).epsilon(1e-9));
}

TEST_CASE("all-green schedule yields zero delay for arbitrary queues") {
    PhaseSchedule s = make_schedule(0.0, 1, {1e9, 1e9}, 3.0);
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        int n = int(rng.next_u64() % 12);
        std::vector<std::pair<double, double>> vs;
        double d = rng.uniform(1.0, 10.0);
        for (int i = 0; i < n; ++i) {
            vs.push_back({d, rng.uniform(0.0, 13.89)});
            d += rng.uniform(2.5, 40.0);
        }
        auto q = queue_of(vs, 0);
        auto delays = estimated_delays(q, s, kCrossing);
        for (double x : delays) CHECK(x == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("branch-2 delay equals the green-start wait") {
    auto q = queue_of({{15.0 * 13.89, 13.89}}, 0);
    auto d = estimated_delays(q, example_schedule(), kCrossing);
    CHECK(d[0] == doctest::Approx(11.0).epsilon(1e-9));
}

TEST_CASE("empty queue gives an empty delay vector") {
    auto q = queue_of({}, 0);
    CHECK(estimated_delays(q, example_schedule(), kCrossing).empty());
}

TEST_CASE("delays are nonnegative and crossing times h_f-separated") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        int m = 2 + int(rng.next_u64() % 2);
        std::vector<double> eta(2 * m);
        for (double& e : eta) e = rng.next_double() < 0.3 ? 0.0 : rng.uniform(2.0, 20.0);
        PhaseSchedule s = make_schedule(0.0, m, eta, 3.0);
        int n = 1 + int(rng.next_u64() % 10);
        std::vector<std::pair<double, double>> vs;
        double d = rng.uniform(1.0, 8.0);
        for (int i = 0; i < n; ++i) {
            vs.push_back({d, rng.uniform(0.0, 13.89)});
            d += rng.uniform(2.5, 30.0);
        }
        auto q = queue_of(vs, int(rng.next_u64() % m), rng.uniform(0.0, 20.0));
        auto free_times = free_flow_crossing_times(q, kCrossing);
        auto sig = signalized_crossing_times(q, s, kCrossing, free_times);
        for (size_t i = 0; i < sig.size(); ++i) {
            CHECK(sig[i] >= free_times[i] - 1e-12);
            if (i > 0) CHECK(sig[i] >= sig[i - 1] + kCrossing.headway - 1e-12);
        }
    }
}

TEST_CASE("green durations from counts") {
    IntersectionSpec spec = two_phase_spec({{1, 2}, {3}});
    DischargePlan plan;
    plan.lost_time = {2, 2, 2, 2};
    plan.counts[1] = {4, 0, 0, 0};
    plan.counts[2] = {6, 0, 0, 0};
    plan.counts[3] = {0, 1, 0, 0};
    auto eta = green_durations_from_counts(plan, spec);
    CHECK(eta[0] == doctest::Approx(14.0));  // max(4,6)*2 + 2
    CHECK(eta[1] == doctest::Approx(4.0));   // 1*2 + 2
    CHECK(eta[2] == doctest::Approx(2.0));   // all zero: lost time only
}

TEST_CASE("zero counts with zero lost time give a skippable phase") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    DischargePlan plan;
    plan.lost_time = {0, 0, 0, 0};
    plan.counts[1] = {0, 0, 0, 0};
    plan.counts[2] = {0, 0, 0, 0};
    auto eta = green_durations_from_counts(plan, spec);
    for (double e : eta) CHECK(e == 0.0);
}

TEST_CASE("optimize_discharge: empty queues give all-zero free counts") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    std::vector<LinkQueueSnapshot> queues;
    auto qa = queue_of({}, 0);
    qa.link = 1;
    auto qb = queue_of({}, 1);
    qb.link = 2;
    queues = {qa, qb};
    std::map<LinkId, std::vector<int>> committed{{1, {0, 0}}, {2, {0, 0}}};
    DischargePlan plan = optimize_discharge(spec, queues, committed, params);
    CHECK(plan.objective == 0.0);
    for (int h = 2; h < 4; ++h) {
        CHECK(plan.counts[1][h] == 0);
        CHECK(plan.counts[2][h] == 0);
    }
}

TEST_CASE("optimize_discharge serves a standing queue within one green") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    auto qa = queue_of({{3.0, 0.0}, {5.0, 0.0}, {7.0, 0.0}}, 0);
    qa.link = 1;
    auto qb = queue_of({}, 1);
    qb.link = 2;
    std::vector<LinkQueueSnapshot> queues{qa, qb};
    std::map<LinkId, std::vector<int>> committed{{1, {0, 0}}, {2, {0, 0}}};
    DischargePlan plan = optimize_discharge(spec, queues, committed, params);

    // exact optimum from the independent per-link enumeration
    double best = oracle::brute_force_discharge(spec, queues, committed, params);
    CHECK(plan.objective == best);
    CHECK(plan.counts[2][3] == 0);  // empty cross street collapses
    CHECK(plan.eta[3] == 0.0);

    // all three vehicles cross inside the opened green
    PhaseSchedule s = make_schedule(0.0, 2, plan.eta, spec.clearance_s);
    auto free_times = free_flow_crossing_times(qa, kCrossing);
    auto sig = signalized_crossing_times(qa, s, kCrossing, free_times);
    auto greens = green_intervals_for_link(s, 0);
    for (double t : sig) {
        bool inside = false;
        for (auto& g : greens)

            inside = inside || (t >= g.begin - 1e-9 && t <= g.end + 1e-9);
        CHECK(inside);
    }
}

TEST_CASE("optimizer matches the brute-force oracle on random small instances") {
    Rng rng(2024);
    SignalParams params;
    params.n_max = 3;
    for (int trial = 0; trial < 60; ++trial) {
        int links_a = 1 + int(rng.next_u64() % 2);
        int links_b = 1 + int(rng.next_u64() % 2);
        std::vector<std::vector<LinkId>> phases(2);
        LinkId next_id = 1;
        for (int i = 0; i < links_a; ++i) phases[0].push_back(next_id++);
        for (int i = 0; i < links_b; ++i) phases[1].push_back(next_id++);
        IntersectionSpec spec = two_phase_spec(phases);

        std::vector<LinkQueueSnapshot> queues;
        std::map<LinkId, std::vector<int>> committed;
        for (int p = 0; p < 2; ++p) {
            for (LinkId l : phases[p]) {
                int n = int(rng.next_u64() % 5);
                std::vector<std::pair<double, double>> vs;
                double d = rng.uniform(1.0, 6.0);
                for (int i = 0; i < n; ++i) {
                    vs.push_back({d, rng.uniform(0.0, 13.89)});
                    d += rng.uniform(2.5, 25.0);
                }
                auto q = queue_of(vs, p, rng.uniform(2.0, 15.0));
                q.link = l;
                queues.push_back(q);
                std::vector<int> row(2, 0);
                row[p] = int(rng.next_u64() % (params.n_max + 1));
                committed[l] = row;
            }
        }
        DischargePlan plan = optimize_discharge(spec, queues, committed, params);
        double best = oracle::brute_force_discharge(spec, queues, committed, params);
        CHECK(plan.objective == best);
    }
}

TEST_CASE("infeasible committed plans are rejected by constraint name") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    auto qa = queue_of({}, 0);
    qa.link = 1;
    std::vector<LinkQueueSnapshot> queues{qa};
    SUBCASE("capacity bound") {
        std::map<LinkId, std::vector<int>> committed{{1, {params.n_max + 1, 0}}};
        CHECK_THROWS_WITH_AS(optimize_discharge(spec, queues, committed, params),
                             doctest::Contains("capacity"), std::invalid_argument);
    }
    SUBCASE("phase compatibility") {
        std::map<LinkId, std::vector<int>> committed{{1, {0, 3}}};  // link 1 is phase 1
        CHECK_THROWS_WITH_AS(optimize_discharge(spec, queues, committed, params),
                             doctest::Contains("phase compatibility"), std::invalid_argument);
    }
}

TEST_CASE("receding horizon: first invocation on an empty network") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    IntersectionController ctrl(spec, params, false);
    auto qa = queue_of({}, 0);
    qa.link = 1;
    auto qb = queue_of({}, 1);
    qb.link = 2;
    BroadcastRecord rec = ctrl.receding_horizon_update(0.0, {qa, qb});
    CHECK(rec.schedule.steps() == 4);
    for (double e : rec.schedule.green) CHECK(e == 0.0);
}

TEST_CASE("receding horizon shift: committed cycle equals previous optimized cycle") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    IntersectionController ctrl(spec, params, false);
    auto make_queues = [&]() {
        auto qa = queue_of({{3.0, 0.0}, {5.0, 0.0}, {40.0, 2.0}}, 0);
        qa.link = 1;
        auto qb = queue_of({{4.0, 0.0}}, 1);
        qb.link = 2;
        return std::vector<LinkQueueSnapshot>{qa, qb};
    };
    BroadcastRecord first = ctrl.receding_horizon_update(0.0, make_queues());
    BroadcastRecord second =
        ctrl.receding_horizon_update(ctrl.next_update_time(), make_queues());
    for (LinkId l : {1, 2}) {
        for (int h = 0; h < 2; ++h) {
            CHECK(second.plan.counts[l][h] == first.plan.counts[l][2 + h]);
        }
        CHECK(second.schedule.green[0] == first.schedule.green[2]);
        CHECK(second.schedule.green[1] == first.schedule.green[3]);
    }
}

TEST_CASE("mid-cycle invocation is a contract violation") {
    IntersectionSpec spec = two_phase_spec({{1}, {2}});
    SignalParams params;
    IntersectionController ctrl(spec, params, false);
    auto qa = queue_of({}, 0);
    qa.link = 1;
    ctrl.receding_horizon_update(0.0, {qa});
    CHECK_THROWS_AS(ctrl.receding_horizon_update(ctrl.next_update_time() + 0.35, {qa}),
                    std::logic_error);
}

TEST_CASE("green intervals for a link") {
    PhaseSchedule s = example_schedule();
    auto g = green_intervals_for_link(s, 0);
    REQUIRE(g.size() == 2);
    CHECK(g[0].begin == doctest::Approx(0.0));
    CHECK(g[0].end == doctest::Approx(10.0));
    CHECK(g[1].begin == doctest::Approx(26.0));
    CHECK(g[1].end == doctest::Approx(36.0));
}

TEST_CASE("zero-duration steps are omitted from green intervals") {
    PhaseSchedule s = make_schedule(0.0, 2, {10, 10, 0, 10}, 3.0);
    auto g = green_intervals_for_link(s, 0);
    REQUIRE(g.size() == 1);
    CHECK(g[0].end == doctest::Approx(10.0));
}

TEST_CASE("unsignalized approaches are always open") {
    auto g = green_intervals_for_link(example_schedule(), -1);
    REQUIRE(g.size() == 1);
    CHECK(g[0].begin == 0.0);
    CHECK(g[0].end > 1e12);
}

TEST_CASE("extended intervals append projected cycles after the horizon") {
    PhaseSchedule s = example_schedule();
    auto g = green_intervals_extended(s, 0, 10.0);
    REQUIRE(g.size() == 5);  // two real + three projected
    CHECK_FALSE(g[1].projected);
    CHECK(g[2].projected);
    CHECK(g[2].begin == doctest::Approx(59.0));  // theta_2M + w_bar * 1
    CHECK(g[3].begin > g[2].end);
}
