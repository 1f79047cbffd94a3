#pragma once

// Space-time footprints of target road resources. Shared by the honest
// agreement policy and the overlap detectors so both decide conflicts the
// same way.

#include <variant>
#include <vector>

#include "mscs/codec.hpp"

namespace mscs::spacetime {

/// Axis-aligned box in road coordinates (s along the road, y lateral).
struct Rect {
    double s_lo = 0, s_hi = 0;
    double y_lo = 0, y_hi = 0;

    friend bool operator==(const Rect&, const Rect&) = default;
};

using Footprint = std::variant<Rect, std::vector<Point>>;

struct Region {
    Footprint footprint;
    Millis start = 0;
    Millis end = 0;
};

/// Lateral band of a lane: [lane * w, (lane + 1) * w].
inline double lane_y_lo(int lane, double lane_width) { return lane * lane_width; }

/// Footprint of a sub-maneuver whose lane offsets are taken relative to
/// `base_lane`. Lane segments span their lane band (widened when the
/// executant is wider than a lane) and are stretched by half the
/// executant length at each end.
Region resolve(const SubManeuver& sub, int base_lane, double lane_width);

/// Closed-interval time intersection; an inverted interval is empty.
bool times_intersect(Millis a0, Millis a1, Millis b0, Millis b1);

/// True when the two footprints share a region of positive area.
bool footprints_overlap(const Footprint& a, const Footprint& b);

bool regions_overlap(const Region& a, const Region& b);

bool polygon_is_simple(const std::vector<Point>& polygon);

}  // namespace mscs::spacetime
