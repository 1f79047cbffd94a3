#include "mscs/spacetime.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include <algorithm>

namespace mscs::spacetime {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint>;

namespace {

BgPolygon to_bg(const Footprint& f) {
    BgPolygon poly;
    if (const auto* r = std::get_if<Rect>(&f)) {
        bg::append(poly.outer(), BgPoint(r->s_lo, r->y_lo));
        bg::append(poly.outer(), BgPoint(r->s_hi, r->y_lo));
        bg::append(poly.outer(), BgPoint(r->s_hi, r->y_hi));
        bg::append(poly.outer(), BgPoint(r->s_lo, r->y_hi));
    } else {
        for (const auto& p : std::get<std::vector<Point>>(f)) bg::append(poly.outer(), BgPoint(p.x, p.y));
    }
    bg::correct(poly);
    return poly;
}

}  // namespace

Region resolve(const SubManeuver& sub, int base_lane, double lane_width) {
    Region region;
    region.start = sub.start_time;
    region.end = sub.end_time;
    if (const auto* seg = std::get_if<LaneSegment>(&sub.trr.location)) {
        const int lane = base_lane + seg->lane_offset;
        const double span = std::max(lane_width, sub.executant_width);
        const double centre = lane_y_lo(lane, lane_width) + lane_width / 2.0;
        const double half_len = std::max(0.0, sub.executant_length) / 2.0;
        region.footprint = Rect{std::min(seg->start_s, seg->end_s) - half_len, std::max(seg->start_s, seg->end_s) + half_len,
                                centre - span / 2.0, centre + span / 2.0};
    } else {
        region.footprint = std::get<GeoRegion>(sub.trr.location).polygon;
    }
    return region;
}

bool times_intersect(Millis a0, Millis a1, Millis b0, Millis b1) {
    if (a0 > a1 || b0 > b1) return false;
    return a0 <= b1 && b0 <= a1;
}

bool footprints_overlap(const Footprint& a, const Footprint& b) {
    const auto* ra = std::get_if<Rect>(&a);
    const auto* rb = std::get_if<Rect>(&b);
    if (ra && rb) {
        return ra->s_lo < rb->s_hi && rb->s_lo < ra->s_hi && ra->y_lo < rb->y_hi && rb->y_lo < ra->y_hi;
    }
    const BgPolygon pa = to_bg(a);
    const BgPolygon pb = to_bg(b);
    return bg::intersects(pa, pb) && !bg::touches(pa, pb);
}

bool regions_overlap(const Region& a, const Region& b) {
    return times_intersect(a.start, a.end, b.start, b.end) && footprints_overlap(a.footprint, b.footprint);
}

bool polygon_is_simple(const std::vector<Point>& polygon) {
    if (polygon.size() < 3) return false;
    // Boost's robust predicates throw on coordinates they cannot convert.
    try {
        BgPolygon poly = to_bg(Footprint{polygon});
        return bg::is_valid(poly);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace mscs::spacetime
