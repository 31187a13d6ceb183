#pragma once

#include <stdexcept>
#include <string>

namespace mtsim {

using NodeId = int;
using LinkId = int;
using VehicleId = int;

enum class VehicleClass { CAV, HDV };

// Half-open in spirit but treated closed at both ends for admissibility
// checks (a crossing scheduled exactly at the green end is admitted).
struct TimeInterval {
    double begin = 0.0;
    double end = 0.0;
    bool projected = false;  // extrapolated beyond the published horizon

    bool contains(double t) const { return t >= begin && t <= end; }
};

struct MotionBounds {
    double v_max = 13.89;
    double u_min = -6.0;
    double u_max = 5.0;
};

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// mathematical mod, result in [0, m)
inline int pos_mod(int a, int m) {
    int r = a % m;
    return r < 0 ? r + m : r;
}

}  // namespace mtsim
