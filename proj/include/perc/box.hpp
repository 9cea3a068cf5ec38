#pragma once

#include <algorithm>
#include <cmath>

namespace perc {

// Closed axis-aligned box [x0,x1] x [y0,y1].
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    static Box centered(double cx, double cy, double r) { return {cx - r, cy - r, cx + r, cy + r}; }

    bool contains(double px, double py) const { return px >= x0 && px <= x1 && py >= y0 && py <= y1; }
    bool contains(const Box& o) const { return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1; }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

// L-infinity distance between points.
inline double linf(double ax, double ay, double bx, double by) {
    return std::max(std::abs(ax - bx), std::abs(ay - by));
}

}  // namespace perc
