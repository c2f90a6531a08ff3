#pragma once

#include <algorithm>
#include <cmath>

namespace evorl {

/// Axis-aligned box in scene pixel coordinates, (x, y) top-left corner.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    double x2() const { return x + w; }
    double y2() const { return y + h; }

    bool contains(const Box& o) const {
        return o.x >= x && o.y >= y && o.x2() <= x2() && o.y2() <= y2();
    }
    bool intersects(const Box& o) const {
        return o.x < x2() && x < o.x2() && o.y < y2() && y < o.y2();
    }
};

inline double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

inline double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Smallest box covering both inputs.
inline Box envelope(const Box& a, const Box& b) {
    const double x1 = std::min(a.x, b.x);
    const double y1 = std::min(a.y, b.y);
    const double x2 = std::max(a.x2(), b.x2());
    const double y2 = std::max(a.y2(), b.y2());
    return {x1, y1, x2 - x1, y2 - y1};
}

inline double center_distance(const Box& a, const Box& b) {
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace evorl
