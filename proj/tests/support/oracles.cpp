#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mscs::testing {

namespace {

struct Box {
    double s_lo, s_hi, y_lo, y_hi;
};

// Even-odd rule. The grid never samples a point on an edge.
bool inside_polygon(const std::vector<Point>& poly, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

struct Shape {
    bool is_box = true;
    Box box{};
    std::vector<Point> poly;
    Box bounds{};

    bool contains(double x, double y) const {
        if (is_box) return box.s_lo < x && x < box.s_hi && box.y_lo < y && y < box.y_hi;
        return inside_polygon(poly, x, y);
    }
};

Shape shape_of(const SubManeuver& sub, double lane_width) {
    Shape sh;
    if (const auto* seg = std::get_if<LaneSegment>(&sub.trr.location)) {
        const double mid = (seg->lane_offset + 0.5) * lane_width;
        const double half_w = std::max(lane_width, sub.executant_width) / 2;
        const double half_l = std::max(0.0, sub.executant_length) / 2;
        sh.box = {seg->start_s - half_l, seg->end_s + half_l, mid - half_w, mid + half_w};
        sh.bounds = sh.box;
        return sh;
    }
    sh.is_box = false;
    sh.poly = std::get<GeoRegion>(sub.trr.location).polygon;
    sh.bounds = {1e300, -1e300, 1e300, -1e300};
    for (const auto& p : sh.poly) {
        sh.bounds.s_lo = std::min(sh.bounds.s_lo, p.x);
        sh.bounds.s_hi = std::max(sh.bounds.s_hi, p.x);
        sh.bounds.y_lo = std::min(sh.bounds.y_lo, p.y);
        sh.bounds.y_hi = std::max(sh.bounds.y_hi, p.y);
    }
    return sh;
}

bool share_time_sample(const SubManeuver& a, const SubManeuver& b) {
    const Millis lo = std::max(a.start_time, b.start_time);
    const Millis hi = std::min(a.end_time, b.end_time);
    for (Millis t = lo - lo % 100; t <= hi; t += 100) {
        if (t >= lo && a.start_time <= t && t <= a.end_time && b.start_time <= t && t <= b.end_time) return true;
    }
    return false;
}

bool share_space_sample(const Shape& a, const Shape& b) {
    const double s_lo = std::max(a.bounds.s_lo, b.bounds.s_lo);
    const double s_hi = std::min(a.bounds.s_hi, b.bounds.s_hi);
    const double y_lo = std::max(a.bounds.y_lo, b.bounds.y_lo);
    const double y_hi = std::min(a.bounds.y_hi, b.bounds.y_hi);
    if (s_lo >= s_hi || y_lo >= y_hi) return false;
    // sample points sit off every 0.5 m lattice line and lattice diagonal
    const long i0 = static_cast<long>(std::floor(s_lo / 0.1)) - 1;
    const long i1 = static_cast<long>(std::ceil(s_hi / 0.1)) + 1;
    const long j0 = static_cast<long>(std::floor(y_lo / 0.1)) - 1;
    const long j1 = static_cast<long>(std::ceil(y_hi / 0.1)) + 1;
    for (long i = i0; i <= i1; ++i) {
        const double x = i * 0.1 + 0.0317;
        for (long j = j0; j <= j1; ++j) {
            const double y = j * 0.1 + 0.0531;
            if (a.contains(x, y) && b.contains(x, y)) return true;
        }
    }
    return false;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> grid_overlap(const Maneuver& m, double lane_width) {
    std::vector<Shape> shapes;
    for (const auto& sub : m.sub_maneuvers) shapes.push_back(shape_of(sub, lane_width));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto& subs = m.sub_maneuvers;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        for (std::size_t j = i + 1; j < subs.size(); ++j) {
            if (share_time_sample(subs[i], subs[j]) && share_space_sample(shapes[i], shapes[j])) out.emplace_back(i, j);
        }
    }
    return out;
}

DenialVerdict window_denials(const std::vector<ResponseRecord>& history, StationId responder, Millis now,
                             Millis window, std::size_t threshold) {
    std::set<std::uint64_t> sessions;
    for (const auto& r : history) sessions.insert(r.maneuver_id);

    DenialVerdict v;
    std::map<StationId, std::size_t> per_requester;
    for (auto id : sessions) {
        // the first qualifying refusal names the requester of the session
        for (const auto& r : history) {
            if (r.maneuver_id != id || r.responder != responder || r.agree) continue;
            if (r.timestamp > now || now - r.timestamp >= window) continue;
            ++v.sessions;
            ++per_requester[r.requester];
            break;
        }
    }
    v.flagged = v.sessions >= threshold;
    for (const auto& [req, n] : per_requester) v.flagged = v.flagged || n >= threshold;
    return v;
}

}  // namespace mscs::testing
