#pragma once

namespace ngmpc {

// Commanded horizontal speed (m/s), climb rate (m/s) and turn rate (rad/s).
struct Control {
    double v = 0.0;
    double z = 0.0;
    double psi = 0.0;

    bool operator==(const Control&) const = default;
};

struct Position {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Position&) const = default;
};

}  // namespace ngmpc
