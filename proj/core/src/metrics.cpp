#include "mtsim/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mtsim {

double MetricsLog::mean_od_minutes() const {
    double sum = 0.0;
    int pairs = 0;
    for (const auto& [od, stat] : od_times) {
        if (stat.trips > 0) {
            sum += stat.total_time / stat.trips / 60.0;
            ++pairs;
        }
    }
    return pairs > 0 ? sum / pairs : 0.0;
}

double total_travel_time(const MetricsLog& log) {
    return log.ttt_accumulation;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    return f;
}

}  // namespace

void export_metrics(const MetricsLog& log, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw ConfigError("cannot create output directory " + out_dir);
    }
    char buf[256];

    {
        auto f = open_out(fs::path(out_dir) / "accumulation.csv");
        f << "time_s,vehicles\n";
        for (size_t i = 0; i < log.accumulation.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.1f,%d\n", i * log.bin_width,
                          log.accumulation[i]);
            f << buf;
        }
    }
    {
        auto f = open_out(fs::path(out_dir) / "edge_volumes.csv");
        f << "edge,cumulative_count,time_avg_count\n";
        for (size_t e = 0; e < log.edge_ids.size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%d,%lld,%.4f\n", log.edge_ids[e],
                          log.edge_volume[e], log.edge_time_avg[e]);
            f << buf;
        }
    }
    {
        auto f = open_out(fs::path(out_dir) / "od_times.csv");
        f << "origin,destination,mean_min,n_trips\n";
        for (const auto& [od, stat] : log.od_times) {
            double mean_min = stat.trips > 0 ? stat.total_time / stat.trips / 60.0 : 0.0;
            std::snprintf(buf, sizeof(buf), "%d,%d,%.4f,%d\n", od.first, od.second,
                          mean_min, stat.trips);
            f << buf;
        }
    }
    {
        auto f = open_out(fs::path(out_dir) / "events.jsonl");
        for (const std::string& line : log.events) f << line << "\n";
    }
}

}  // namespace mtsim
