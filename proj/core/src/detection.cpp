#include "mscs/detection.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mscs {

namespace {

struct DetectorInfo {
    DetectorId id;
    std::string_view code;
    std::string_view name;
};

constexpr std::array<DetectorInfo, 17> kDetectors{{
    {DetectorId::D1, "D1", "FormatCheck"},
    {DetectorId::D2, "D2", "TrrConsistency"},
    {DetectorId::D3, "D3", "GhostVehicle"},
    {DetectorId::D4, "D4", "DenialRate"},
    {DetectorId::D5, "D5", "MaxSpeedPlausibility"},
    {DetectorId::D6, "D6", "LaneExistence"},
    {DetectorId::D7, "D7", "SubManeuverOverlap"},
    {DetectorId::D7x, "D7x", "CrossSessionOverlap"},
    {DetectorId::D8, "D8", "NonResponseEvidence"},
    {DetectorId::D9, "D9", "MinSpeedPlausibility"},
    {DetectorId::D10, "D10", "StaticFieldConsistency"},
    {DetectorId::D11, "D11", "WidthPlausibility"},
    {DetectorId::D12, "D12", "LengthPlausibility"},
    {DetectorId::D13, "D13", "TemporalOrder"},
    {DetectorId::D14, "D14", "StartBeforeTimestamp"},
    {DetectorId::D15, "D15", "DurationBound"},
    {DetectorId::D16, "D16", "BsmMscmConsistency"},
}};

const DetectorInfo& info(DetectorId d) { return kDetectors[static_cast<std::size_t>(d)]; }

std::pair<double, double> s_extent(const spacetime::Footprint& f) {
    if (const auto* r = std::get_if<spacetime::Rect>(&f)) return {r->s_lo, r->s_hi};
    const auto& poly = std::get<std::vector<Point>>(f);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : poly) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    return {lo, hi};
}

}  // namespace

std::string_view to_string(DetectorId d) { return info(d).code; }
std::string_view detector_name(DetectorId d) { return info(d).name; }

std::optional<DetectorId> parse_detector(std::string_view text) {
    for (const auto& d : kDetectors) {
        if (d.code == text || d.name == text) return d.id;
    }
    return std::nullopt;
}

const std::vector<DetectorId>& all_detectors() {
    static const std::vector<DetectorId> all = [] {
        std::vector<DetectorId> v;
        for (const auto& d : kDetectors) v.push_back(d.id);
        return v;
    }();
    return all;
}

double Evidence::value(std::string_view key) const {
    for (const auto& [k, v] : values) {
        if (k == key) return v;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

DetectorConfig DetectorConfig::defaults() {
    DetectorConfig cfg;
    for (auto d : all_detectors()) {
        if (d != DetectorId::D7x) cfg.enabled.insert(d);
    }
    return cfg;
}

std::vector<std::pair<std::size_t, std::size_t>> check_overlap(const Maneuver& m, double lane_width) {
    std::vector<spacetime::Region> regions;
    regions.reserve(m.sub_maneuvers.size());
    for (const auto& sub : m.sub_maneuvers) regions.push_back(spacetime::resolve(sub, 0, lane_width));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
            if (spacetime::regions_overlap(regions[i], regions[j])) pairs.emplace_back(i, j);
        }
    }
    return pairs;
}

std::vector<RememberedTrr> check_cross_session_overlap(const std::vector<RememberedTrr>& remembered, const Mscm& req,
                                                       int requester_lane, double lane_width) {
    std::vector<RememberedTrr> hits;
    if (!req.maneuver) return hits;
    for (const auto& sub : req.maneuver->sub_maneuvers) {
        const auto region = spacetime::resolve(sub, requester_lane, lane_width);
        for (const auto& r : remembered) {
            if (r.maneuver_id == req.maneuver_id || r.requester != req.source_id || r.executant == sub.executant_id) {
                continue;
            }
            if (spacetime::regions_overlap(region, r.region)) hits.push_back(r);
        }
    }
    return hits;
}

std::vector<ResponseRecord> check_denial_rate(const std::vector<ResponseRecord>& history, StationId responder,
                                              Millis now, Millis window, std::size_t threshold) {
    std::vector<ResponseRecord> in_window;
    std::set<std::uint64_t> seen;
    for (const auto& r : history) {
        if (r.responder != responder || r.agree || r.timestamp > now) continue;
        if (r.timestamp + window <= now) continue;
        if (seen.insert(r.maneuver_id).second) in_window.push_back(r);
    }
    if (threshold == 0 || in_window.size() >= threshold) return in_window;
    std::map<StationId, std::vector<ResponseRecord>> by_requester;
    for (const auto& r : in_window) by_requester[r.requester].push_back(r);
    for (auto& [req, records] : by_requester) {
        if (records.size() >= threshold) return records;
    }
    return {};
}

std::vector<PositionClaim> check_ghost(const std::vector<PositionClaim>& claims, const PerceptionSnapshot& snapshot,
                                       double tolerance) {
    std::vector<PositionClaim> ghosts;
    for (const auto& c : claims) {
        if (std::abs(c.s - snapshot.observer_s) > snapshot.range) continue;
        const bool seen = std::any_of(snapshot.observed.begin(), snapshot.observed.end(), [&](const ObservedVehicle& o) {
            return o.lane == c.lane && std::abs(o.s - c.s) <= tolerance;
        });
        if (!seen) ghosts.push_back(c);
    }
    return ghosts;
}

std::vector<Violation> check_value_plausibility(const SubManeuver& sub, const PlausibilityContext& ctx,
                                                const DetectorConfig& cfg) {
    std::vector<Violation> out;
    const double speed_bound = ctx.map.speed_limit * cfg.speed_limit_factor;
    if (!ctx.signer_special && sub.max_speed > speed_bound) {
        out.push_back({DetectorId::D5, {"max_speed above bound", {{"claimed", sub.max_speed}, {"bound", speed_bound}}}});
    }
    if (ctx.map.highway) {
        const double floor = std::max(cfg.min_speed_floor, cfg.min_speed_fraction * ctx.neighbour_speed.value_or(0.0));
        if (sub.min_speed < floor) {
            out.push_back({DetectorId::D9, {"min_speed below bound", {{"claimed", sub.min_speed}, {"bound", floor}}}});
        }
    }
    if (sub.executant_width > ctx.map.lane_width) {
        out.push_back({DetectorId::D11,
                       {"width exceeds lane", {{"claimed", sub.executant_width}, {"bound", ctx.map.lane_width}}}});
    }
    if (sub.executant_length > cfg.max_length) {
        out.push_back(
            {DetectorId::D12, {"length implausible", {{"claimed", sub.executant_length}, {"bound", cfg.max_length}}}});
    }
    if (sub.start_time >= sub.end_time) {
        out.push_back({DetectorId::D13,
                       {"start not before end", {{"start", double(sub.start_time)}, {"end", double(sub.end_time)}}}});
    }
    if (sub.start_time < ctx.msg_timestamp) {
        out.push_back({DetectorId::D14, {"start before message timestamp",
                                         {{"start", double(sub.start_time)}, {"msg_timestamp", double(ctx.msg_timestamp)}}}});
    }
    if (sub.end_time > sub.start_time && sub.end_time - sub.start_time > cfg.max_duration) {
        out.push_back({DetectorId::D15, {"duration too long",
                                         {{"duration", double(sub.end_time - sub.start_time)},
                                          {"bound", double(cfg.max_duration)}}}});
    }
    return out;
}

std::optional<Evidence> check_dimensions(const SubManeuver& sub, const Bsm& bsm, const DetectorConfig& cfg) {
    const double dw = std::abs(sub.executant_width - bsm.width);
    const double dl = std::abs(sub.executant_length - bsm.length);
    if (dw <= cfg.width_tolerance && dl <= cfg.length_tolerance) return std::nullopt;
    return Evidence{"dimensions differ from beacon",
                    {{"mscm_width", sub.executant_width},
                     {"bsm_width", bsm.width},
                     {"mscm_length", sub.executant_length},
                     {"bsm_length", bsm.length}}};
}

std::optional<Evidence> check_trajectory(const SubManeuver& sub, int target_lane, const Bsm& bsm,
                                         const DetectorConfig& cfg) {
    const Millis t = bsm.timestamp;
    const auto* seg = std::get_if<LaneSegment>(&sub.trr.location);
    if (!seg) return std::nullopt;
    if (t >= sub.start_time && t < sub.end_time) {
        const bool lane_off = std::abs(bsm.lane - target_lane) > cfg.lane_deviation;
        const bool s_off = bsm.s < seg->start_s - cfg.longitudinal_deviation ||
                           bsm.s > seg->end_s + cfg.longitudinal_deviation;
        if (lane_off || s_off) {
            return Evidence{"beacon outside maneuver corridor",
                            {{"bsm_lane", double(bsm.lane)}, {"target_lane", double(target_lane)}, {"bsm_s", bsm.s},
                             {"start_s", seg->start_s}, {"end_s", seg->end_s}, {"t", double(t)}}};
        }
    } else if (t >= sub.end_time && t <= sub.end_time + cfg.settle_time && bsm.lane != target_lane) {
        return Evidence{"maneuver not performed",
                        {{"bsm_lane", double(bsm.lane)}, {"target_lane", double(target_lane)}, {"t", double(t)}}};
    }
    return std::nullopt;
}

std::optional<std::pair<Millis, MessageDigest>> check_nonresponse(
    const SessionState& expired, StationId suspect, const std::vector<std::pair<Millis, MessageDigest>>& heard,
    Millis response_timeout) {
    if (!expired.pending.contains(suspect)) return std::nullopt;
    for (const auto& h : heard) {
        if (h.first >= expired.created_at && h.first <= expired.created_at + response_timeout) return h;
    }
    return std::nullopt;
}

const Bsm* ObserverView::latest_bsm(StationId id, Millis at_or_before) const {
    auto it = bsms.find(id);
    if (it == bsms.end()) return nullptr;
    for (auto b = it->second.rbegin(); b != it->second.rend(); ++b) {
        if (b->first.timestamp <= at_or_before) return &b->first;
    }
    return nullptr;
}

std::optional<int> ObserverView::lane_of(StationId id, Millis at_or_before) const {
    if (const auto* b = latest_bsm(id, at_or_before)) return b->lane;
    return std::nullopt;
}

std::optional<double> ObserverView::neighbour_speed(Millis now, Millis window) const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [id, list] : bsms) {
        for (const auto& [b, d] : list) {
            if (b.timestamp + window >= now && b.timestamp <= now) {
                sum += b.speed;
                ++n;
            }
        }
    }
    if (n == 0) return std::nullopt;
    return sum / double(n);
}

std::vector<RememberedTrr> ObserverView::remembered_trrs() const {
    std::vector<RememberedTrr> out;
    for (const auto& [id, ks] : sessions) {
        if (is_terminal(ks.state.phase)) continue;
        const auto& subs = ks.state.maneuver.sub_maneuvers;
        for (std::size_t i = 0; i < subs.size() && i < ks.regions.size(); ++i) {
            out.push_back({id, ks.state.requester, subs[i].executant_id, ks.regions[i]});
        }
    }
    return out;
}

void ObserverView::prune(Millis now, const DetectorConfig& cfg) {
    auto older = [now](Millis t, Millis window) { return t + window < now; };
    for (auto it = bsms.begin(); it != bsms.end();) {
        auto& list = it->second;
        while (!list.empty() && older(list.front().first.timestamp, cfg.bsm_window)) list.pop_front();
        it = list.empty() ? bsms.erase(it) : std::next(it);
    }
    while (!mscms.empty() && older(mscms.front().received_at, std::max(cfg.mscm_window, cfg.static_field_window))) {
        mscms.pop_front();
    }
    std::erase_if(responses, [&](const ResponseRecord& r) { return older(r.timestamp, cfg.denial_window * 2); });
    while (!perception.empty() && older(perception.begin()->first, 2000)) perception.erase(perception.begin());
    for (auto it = heard.begin(); it != heard.end();) {
        std::erase_if(it->second, [&](const auto& h) { return older(h.first, cfg.bsm_window); });
        it = it->second.empty() ? heard.erase(it) : std::next(it);
    }
    std::erase_if(sessions, [&](const auto& kv) {
        const auto& s = kv.second.state;
        const Millis horizon = std::max(s.latest_end(), s.created_at) + cfg.settle_time + cfg.mscm_window;
        return now > horizon;
    });
}

namespace {

class EventSink {
public:
    EventSink(const DetectorConfig& cfg, Millis now) : cfg_(cfg), now_(now) {}

    DetectionEvent* add(DetectorId d, StationId suspect, const MessageDigest& ref, Evidence ev,
                        std::optional<std::uint64_t> session = std::nullopt) {
        if (!cfg_.on(d)) return nullptr;
        events_.push_back({d, suspect, ref, session, now_, std::move(ev), {}});
        return &events_.back();
    }
    bool has(DetectorId d) const {
        return std::any_of(events_.begin(), events_.end(), [d](const DetectionEvent& e) { return e.detector == d; });
    }
    std::vector<DetectionEvent> take() {
        std::stable_sort(events_.begin(), events_.end(),
                         [](const DetectionEvent& a, const DetectionEvent& b) { return a.detector < b.detector; });
        return std::move(events_);
    }

private:
    const DetectorConfig& cfg_;
    Millis now_;
    std::vector<DetectionEvent> events_;
};

void inspect_request(const Mscm& m, const MessageDigest& digest, const ObserverView& view, const DetectorConfig& cfg,
                     Millis now, EventSink& sink) {
    const auto& subs = m.maneuver->sub_maneuvers;
    const StationId src = m.source_id;
    const auto src_lane = view.lane_of(src, m.msg_timestamp);

    PlausibilityContext pctx{view.map, view.neighbour_speed(now, cfg.neighbour_speed_window),
                             view.directory && view.directory->is_special(m.signature.signer_id), m.msg_timestamp};
    for (const auto& sub : subs) {
        for (auto& v : check_value_plausibility(sub, pctx, cfg)) {
            if (!sink.has(v.detector)) sink.add(v.detector, src, digest, std::move(v.evidence), m.maneuver_id);
        }
    }

    if (src_lane) {
        for (const auto& sub : subs) {
            const auto* seg = std::get_if<LaneSegment>(&sub.trr.location);
            if (seg && !lane_exists(view.map, *src_lane, seg->lane_offset)) {
                sink.add(DetectorId::D6, src, digest,
                         {"lane does not exist", {{"source_lane", double(*src_lane)}, {"lane_offset", double(seg->lane_offset)},
                                                   {"lane_count", double(view.map.lane_count)}}},
                         m.maneuver_id);
                break;
            }
        }
    }

    if (auto pairs = check_overlap(*m.maneuver, view.map.lane_width); !pairs.empty()) {
        sink.add(DetectorId::D7, src, digest,
                 {"overlapping sub-maneuvers", {{"first", double(pairs.front().first)},
                                                {"second", double(pairs.front().second)},
                                                {"pairs", double(pairs.size())}}},
                 m.maneuver_id);
    }

    if (m.msg_type == MscmType::Request && src_lane && cfg.on(DetectorId::D7x)) {
        auto hits = check_cross_session_overlap(view.remembered_trrs(), m, *src_lane, view.map.lane_width);
        if (!hits.empty()) {
            sink.add(DetectorId::D7x, src, digest,
                     {"overlaps another session of the same requester",
                      {{"other_session", double(hits.front().maneuver_id)},
                       {"other_executant", double(hits.front().executant.value)}}},
                     m.maneuver_id);
        }
    }

    if (cfg.on(DetectorId::D10)) {
        for (const auto& sub : subs) {
            bool found = false;
            for (const auto& rec : view.mscms) {
                if (rec.msg.source_id != src || !rec.msg.maneuver || rec.received_at + cfg.static_field_window < now) {
                    continue;
                }
                for (const auto& old : rec.msg.maneuver->sub_maneuvers) {
                    if (old.executant_id == sub.executant_id && old.executant_width != sub.executant_width) {
                        auto* e = sink.add(DetectorId::D10, src, digest,
                                           {"static field changed", {{"previous_width", old.executant_width},
                                                                     {"width", sub.executant_width}}},
                                           m.maneuver_id);
                        if (e) e->supporting.push_back(rec.digest);
                        found = true;
                        break;
                    }
                }
                if (found) break;
            }
            if (found) break;
        }
    }

    if (cfg.on(DetectorId::D16)) {
        for (const auto& sub : subs) {
            const Bsm* b = view.latest_bsm(sub.executant_id, now);
            if (!b) continue;
            if (auto ev = check_dimensions(sub, *b, cfg)) {
                sink.add(DetectorId::D16, src, digest, std::move(*ev), m.maneuver_id);
                break;
            }
        }
    }

    // Executants that never beacon although their reserved road lies in
    // sensor range: the requester is vouching for vehicles that are not there.
    if (cfg.on(DetectorId::D3) && !view.perception.empty()) {
        const auto& snap = view.perception.rbegin()->second;
        for (const auto& sub : subs) {
            if (sub.executant_id == view.self) continue;
            const Bsm* b = view.latest_bsm(sub.executant_id, now);
            if (b && b->timestamp + cfg.bsm_window >= now) continue;
            const auto region = spacetime::resolve(sub, src_lane.value_or(0), view.map.lane_width);
            const auto [lo, hi] = s_extent(region.footprint);
            if (lo > snap.observer_s + snap.range || hi < snap.observer_s - snap.range) continue;
            sink.add(DetectorId::D3, src, digest,
                     {"executant never observed", {{"executant", double(sub.executant_id.value)},
                                                   {"trr_s_lo", lo}, {"trr_s_hi", hi}}},
                     m.maneuver_id);
            break;
        }
    }
}

void inspect_response(const Mscm& m, const MessageDigest& digest, const ObserverView& view, const DetectorConfig& cfg,
                      Millis now, EventSink& sink) {
    if (!cfg.on(DetectorId::D4) || !m.reason_code || m.reason_code->agree) return;
    if (!view.received_requests.contains(m.maneuver_id) || view.flagged_requests.contains(m.maneuver_id)) return;
    auto history = view.responses;
    StationId requester = m.destination_ids.empty() ? StationId{} : m.destination_ids.front();
    if (auto it = view.sessions.find(m.maneuver_id); it != view.sessions.end()) requester = it->second.state.requester;
    history.push_back({now, m.source_id, requester, m.maneuver_id, false, digest});
    auto window = check_denial_rate(history, m.source_id, now, cfg.denial_window, cfg.denial_threshold);
    if (window.empty()) return;
    auto* e = sink.add(DetectorId::D4, m.source_id, digest,
                       {"denial rate", {{"denials", double(window.size())}, {"window_ms", double(cfg.denial_window)}}},
                       m.maneuver_id);
    if (e) {
        for (const auto& r : window) e->supporting.push_back(r.digest);
    }
}

}  // namespace

std::vector<DetectionEvent> run_detectors(const DetectorInput& input, const ObserverView& view,
                                          const DetectorConfig& cfg, Millis now) {
    EventSink sink(cfg, now);
    if (const auto* in = std::get_if<MscmInput>(&input)) {
        const Mscm& m = *in->msg;
        if (m.maneuver && (m.msg_type == MscmType::Request || m.msg_type == MscmType::SpecialAnnounce)) {
            inspect_request(m, in->digest, view, cfg, now, sink);
        } else if (m.msg_type == MscmType::Response) {
            inspect_response(m, in->digest, view, cfg, now, sink);
        }
    } else if (const auto* in = std::get_if<UndecodableInput>(&input)) {
        const bool trr = in->error.kind == CodecErrorKind::TrrMismatch;
        sink.add(trr ? DetectorId::D2 : DetectorId::D1, in->signer, in->digest,
                 {in->error.describe(), {{"kind", double(static_cast<int>(in->error.kind))}}});
    } else if (const auto* in = std::get_if<BsmInput>(&input)) {
        const Bsm& b = *in->bsm;
        if (cfg.on(DetectorId::D3)) {
            if (auto snap = view.perception.find(b.timestamp); snap != view.perception.end()) {
                auto ghosts = check_ghost({{b.source_id, b.lane, b.s}}, snap->second, cfg.ghost_tolerance);
                if (!ghosts.empty()) {
                    sink.add(DetectorId::D3, b.source_id, in->digest,
                             {"claimed position is empty", {{"lane", double(b.lane)}, {"s", b.s},
                                                            {"observer_s", snap->second.observer_s}}});
                }
            }
        }
        if (cfg.on(DetectorId::D16)) {
            for (const auto& [id, ks] : view.sessions) {
                if (!ks.was_active || ks.state.phase == Phase::Cancelled) continue;
                const auto& subs = ks.state.maneuver.sub_maneuvers;
                for (std::size_t i = 0; i < subs.size() && i < ks.target_lanes.size(); ++i) {
                    if (subs[i].executant_id != b.source_id || ks.target_lanes[i] < 0) continue;
                    if (auto ev = check_trajectory(subs[i], ks.target_lanes[i], b, cfg)) {
                        sink.add(DetectorId::D16, b.source_id, in->digest, std::move(*ev), id);
                        break;
                    }
                }
                if (sink.has(DetectorId::D16)) break;
            }
        }
    } else if (const auto* in = std::get_if<ExpiredSessionInput>(&input)) {
        if (cfg.on(DetectorId::D8)) {
            static const std::vector<std::pair<Millis, MessageDigest>> none;
            for (auto suspect : in->session->pending) {
                auto it = view.heard.find(suspect);
                const auto& heard = it == view.heard.end() ? none : it->second;
                if (auto hit = check_nonresponse(*in->session, suspect, heard, in->response_timeout)) {
                    sink.add(DetectorId::D8, suspect, hit->second,
                             {"pending responder was transmitting", {{"heard_at", double(hit->first)},
                                                                     {"created_at", double(in->session->created_at)}}},
                             in->session->maneuver_id);
                }
            }
        }
    }
    return sink.take();
}

std::optional<DetectionEvent> screen_request(const Mscm& req, const MessageDigest& digest, const ObserverView& view,
                                             const DetectorConfig& cfg, Millis now) {
    static const std::set<DetectorId> kScreen{DetectorId::D2,  DetectorId::D5,  DetectorId::D6,  DetectorId::D7,
                                              DetectorId::D7x, DetectorId::D9,  DetectorId::D13, DetectorId::D14,
                                              DetectorId::D15};
    DetectorConfig narrowed = cfg;
    std::erase_if(narrowed.enabled, [](DetectorId d) { return !kScreen.contains(d); });
    auto events = run_detectors(MscmInput{&req, digest}, view, narrowed, now);
    if (events.empty()) return std::nullopt;
    return events.front();
}

MissingEvidence::MissingEvidence(const MessageDigest& d)
    : std::runtime_error(fmt::format("evidence {} is not in the store", d.hex())) {}

const Bytes* EvidenceStore::find(const MessageDigest& d) const {
    auto it = store_.find(d);
    return it == store_.end() ? nullptr : it->second.get();
}

MisbehaviorReport generate_report(StationId reporter, const std::vector<DetectionEvent>& events,
                                  const EvidenceStore& store, Millis now) {
    if (events.empty()) throw std::invalid_argument("generate_report: no events");
    MisbehaviorReport report;
    report.reporter = reporter;
    report.suspect = events.front().suspect;
    report.created_at = now;
    std::set<MessageDigest> included;
    auto include = [&](const MessageDigest& d) {
        if (!included.insert(d).second) return;
        const Bytes* bytes = store.find(d);
        if (!bytes) throw MissingEvidence(d);
        report.included_messages.push_back(*bytes);
    };
    for (const auto& e : events) {
        if (e.suspect != report.suspect) throw std::invalid_argument("generate_report: events name different suspects");
        include(e.message_ref);
        for (const auto& d : e.supporting) include(d);
        report.events.push_back(e);
    }
    return report;
}

}  // namespace mscs
