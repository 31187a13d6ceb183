#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtsim/engine.hpp"
#include "mtsim/metrics.hpp"

using namespace mtsim;

namespace {

// T-junction: corridor 1-2-3 plus a side street 4, node 2 signalized
std::string corridor_json(double len1 = 400.0, double len2 = 400.0) {
    std::ostringstream os;
    os << R"({"nodes":[1,2,3,4],"links":[)"
       << R"({"id":1,"from":1,"to":2,"length_m":)" << len1 << R"(,"vmax_mps":13.89},)"
       << R"({"id":2,"from":2,"to":1,"length_m":)" << len1 << R"(,"vmax_mps":13.89},)"
       << R"({"id":3,"from":2,"to":3,"length_m":)" << len2 << R"(,"vmax_mps":13.89},)"
       << R"({"id":4,"from":3,"to":2,"length_m":)" << len2 << R"(,"vmax_mps":13.89},)"
       << R"({"id":5,"from":4,"to":2,"length_m":400.0,"vmax_mps":13.89},)"
       << R"({"id":6,"from":2,"to":4,"length_m":400.0,"vmax_mps":13.89}],)"
       << R"("intersections":[{"id":2,"R_m":200.0,"h_c_s":3.0,"h_f_s":2.0,)"
       << R"("phases":[[1,4],[5]]}]})";
    return os.str();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig short_sioux(ControlMode mode, std::uint64_t seed, double duration) {
    ScenarioConfig cfg = default_scenario();
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.duration = duration;
    return cfg;
}

}  // namespace

TEST_CASE("fixed-time plans cycle with equal greens") {
    NetworkGraph g = load_network_file(default_network_path());
    auto plans = fixed_time_plans(g, 20.0, 3.0);
    CHECK(plans.size() == g.intersections.size());
    const PhaseSchedule& s = plans.begin()->second;
    int m = s.num_phases;
    // cycle = M * (green + clearance)
    CHECK(s.next_cycle_time() == doctest::Approx(m * 23.0));
    auto greens = green_intervals_for_link(s, 0);
    REQUIRE(greens.size() == 2);
    CHECK(greens[0].begin == doctest::Approx(0.0));
    CHECK(greens[0].end == doctest::Approx(20.0));
    CHECK(greens[1].begin == doctest::Approx(m * 23.0));
}

TEST_CASE("demand table: 250 veh/h yields about 146 spawns per OD pair") {
    ScenarioConfig cfg = default_scenario();
    cfg.seed = 1;
    auto table = generate_demand(cfg);
    std::map<int, int> per_od;
    for (const auto& s : table) ++per_od[s.od_index];
    CHECK(per_od.size() == 16);
    for (auto& [od, n] : per_od) {
        CHECK(n >= 143);
        CHECK(n <= 148);
    }
    // deterministic in the seed
    auto again = generate_demand(cfg);
    REQUIRE(again.size() == table.size());
    for (size_t i = 0; i < table.size(); ++i) {
        CHECK(again[i].time == table[i].time);
        CHECK(again[i].is_cav == table[i].is_cav);
    }
}

TEST_CASE("penetration zero spawns only HDVs") {
    ScenarioConfig cfg = default_scenario();
    cfg.mode = ControlMode::Baseline;  // forces penetration 0
    auto table = generate_demand(cfg);
    for (const auto& s : table) CHECK_FALSE(s.is_cav);
}

TEST_CASE("zero demand spawns nothing and yields zero TTT") {
    ScenarioConfig cfg = default_scenario();
    for (auto& d : cfg.demand) d.rate_veh_h = 0.0;
    cfg.duration = 120.0;
    CHECK(generate_demand(cfg).empty());
    MetricsLog log = run_simulation(cfg);
    CHECK(log.spawned == 0);
    CHECK(total_travel_time(log) == 0.0);
}

TEST_CASE("single CAV under a permanent green crosses at its earliest arrival") {
    NetworkGraph g = load_network(corridor_json(400.0, 400.0));
    ScenarioConfig cfg;
    cfg.mode = ControlMode::SignalCav;
    cfg.duration = 120.0;
    cfg.demand = {{1, 3, 1.0}};  // at 1 veh/h the single spawn arrives late; raise rate
    cfg.demand[0].rate_veh_h = 36.0;  // first headway ~100 s; still too slow
    cfg.penetration = 1.0;
    cfg.seed = 3;
    // force one early spawn by using a high rate and stopping after the first
    cfg.demand[0].rate_veh_h = 360.0;
    Simulation sim(cfg, g);
    MetricsLog log = sim.run();
    REQUIRE(log.spawned >= 1);
    CHECK(log.signal_violations == 0);
    CHECK(log.contact_events == 0);

    // the first vehicle spawns at 13.89 m/s 400 m upstream: under an
    // effectively permanent green (empty network, optimizer keeps the phase
    // open or the vehicle stops once) it reaches node 2 no earlier than the
    // free-flow bound
    double first_cross = 1e18;
    for (const auto& line : log.events) {
        if (line.find("\"ev\":\"cross\"") != std::string::npos &&
            line.find("\"link\":1,") != std::string::npos) {
            double tx = std::stod(line.substr(line.find("\"tx\":") + 5));
            first_cross = std::min(first_cross, tx);
        }
    }
    REQUIRE(first_cross < 1e18);
    double spawn_t = 1e18;
    for (const auto& line : log.events) {
        if (line.find("\"ev\":\"spawn\"") != std::string::npos) {
            spawn_t = std::stod(line.substr(line.find("\"t\":") + 4));
            break;
        }
    }
    CHECK(first_cross >= spawn_t + 400.0 / 13.89 - 0.2);
}

TEST_CASE("runs are byte-deterministic") {
    ScenarioConfig cfg = short_sioux(ControlMode::Full, 11, 420.0);
    MetricsLog a = run_simulation(cfg);
    MetricsLog b = run_simulation(cfg);
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mtsim_det_test";
    export_metrics(a, (dir / "a").string());
    export_metrics(b, (dir / "b").string());
    for (const char* f :
         {"accumulation.csv", "edge_volumes.csv", "od_times.csv", "events.jsonl"}) {
        CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
    fs::remove_all(dir);
}

TEST_CASE("conservation, collisions and signal legality on a short run") {
    for (ControlMode mode : {ControlMode::Baseline, ControlMode::Full}) {
        ScenarioConfig cfg = short_sioux(mode, 2, 600.0);
        MetricsLog log = run_simulation(cfg);
        CHECK(log.conservation_ok);
        CHECK(log.contact_events == 0);
        CHECK(log.signal_violations == 0);
        CHECK(log.spawned > 0);
        // TTT identities
        CHECK(log.ttt_accumulation == doctest::Approx(log.ttt_edge_bins).epsilon(1e-12));
    }
}

TEST_CASE("penetration zero collapses CAV modes onto signal-only") {
    ScenarioConfig base = short_sioux(ControlMode::SignalOnly, 4, 420.0);
    base.penetration = 0.0;
    MetricsLog ref = run_simulation(base);
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mtsim_nest_test";
    export_metrics(ref, (dir / "signal").string());
    for (ControlMode mode : {ControlMode::SignalCav, ControlMode::Full}) {
        ScenarioConfig cfg = base;
        cfg.mode = mode;
        MetricsLog log = run_simulation(cfg);
        export_metrics(log, (dir / to_string(mode)).string());
        for (const char* f :
             {"accumulation.csv", "edge_volumes.csv", "od_times.csv", "events.jsonl"}) {
            CHECK(read_file(dir / "signal" / f) == read_file(dir / to_string(mode) / f));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("export: headers-only files for an empty log") {
    MetricsLog log;
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mtsim_export_test";
    export_metrics(log, dir.string());
    CHECK(read_file(dir / "accumulation.csv") == "time_s,vehicles\n");
    CHECK(read_file(dir / "edge_volumes.csv") == "edge,cumulative_count,time_avg_count\n");
    CHECK(read_file(dir / "od_times.csv") == "origin,destination,mean_min,n_trips\n");
    CHECK(read_file(dir / "events.jsonl").empty());
    fs::remove_all(dir);
}

TEST_CASE("export: OD mean over two completed trips") {
    MetricsLog log;
    log.od_times[{1, 10}] = {600.0 + 1200.0, 2};  // 10 min and 20 min
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mtsim_export_od";
    export_metrics(log, dir.string());
    std::string od = read_file(dir / "od_times.csv");
    CHECK(od.find("1,10,15.0000,2") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("accumulation column sum times bin width equals the TTT output") {
    ScenarioConfig cfg = short_sioux(ControlMode::SignalOnly, 8, 420.0);
    MetricsLog log = run_simulation(cfg);
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mtsim_ttt_ident";
    export_metrics(log, dir.string());
    std::ifstream in(dir / "accumulation.csv");
    std::string line;
    std::getline(in, line);  // header
    double sum = 0.0;
    while (std::getline(in, line)) {
        sum += std::stod(line.substr(line.find(',') + 1));
    }
    CHECK(sum * log.bin_width == doctest::Approx(total_travel_time(log)));
    fs::remove_all(dir);
}

TEST_CASE("scenario config parsing and validation") {
    SUBCASE("mode names round-trip") {
        for (ControlMode m : {ControlMode::Baseline, ControlMode::SignalOnly,
                              ControlMode::SignalCav, ControlMode::Full}) {
            CHECK(mode_from_string(to_string(m)) == m);
        }
        CHECK_THROWS_AS(mode_from_string("bogus"), ConfigError);
    }
    SUBCASE("invalid penetration is rejected") {
        ScenarioConfig cfg = default_scenario();
        cfg.penetration = 1.5;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("JSON sections override defaults") {
        ScenarioConfig cfg = load_scenario(R"({
            "sim": {"mode": "signal-cav", "duration_s": 900, "seed": 9},
            "demand": {"origins": [1], "destinations": [10], "rate_veh_h": 100,
                        "penetration": 0.25},
            "idm": {"T": 1.2},
            "signal": {"n_max": 5},
            "cav": {"barrier_rate": 0.5},
            "routing": {"window_s": 120}
        })");
        CHECK(cfg.mode == ControlMode::SignalCav);
        CHECK(cfg.duration == 900.0);
        CHECK(cfg.seed == 9);
        REQUIRE(cfg.demand.size() == 1);
        CHECK(cfg.demand[0].rate_veh_h == 100.0);
        CHECK(cfg.penetration == 0.25);
        CHECK(cfg.idm.T == 1.2);
        CHECK(cfg.signal.n_max == 5);
        CHECK(cfg.safety.barrier_rate == 0.5);
        CHECK(cfg.routing.window == 120.0);
    }
}
