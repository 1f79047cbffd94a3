#include "mscs/attacks.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mscs {

namespace {

constexpr auto H = Rating::High;
constexpr auto M = Rating::Medium;
constexpr auto L = Rating::Low;

struct AttackInfo {
    AttackId id;
    std::string_view code;
    std::string_view name;
};

constexpr std::array<AttackInfo, 16> kAttacks{{
    {AttackId::A1, "A1", "OmitMandatoryField"},
    {AttackId::A2, "A2", "TrrTypeMismatch"},
    {AttackId::A3, "A3", "GhostNegotiation"},
    {AttackId::A4, "A4", "DenyAllRequests"},
    {AttackId::A5, "A5", "MaxSpeedTooHigh"},
    {AttackId::A6, "A6", "NonexistentLane"},
    {AttackId::A7, "A7", "OverloadedManeuver"},
    {AttackId::A8, "A8", "OverlappingSubManeuvers"},
    {AttackId::A9, "A9", "SilentNonResponse"},
    {AttackId::A10, "A10", "MinSpeedTooLow"},
    {AttackId::A11, "A11", "PlausibleFalseStatic"},
    {AttackId::A12, "A12", "WidthOverLane"},
    {AttackId::A13, "A13", "LengthImplausible"},
    {AttackId::A14, "A14", "StartAfterEnd"},
    {AttackId::A15, "A15", "StartBeforeTimestamp"},
    {AttackId::A16, "A16", "ExcessiveDuration"},
}};

const AttackInfo& info(AttackId a) { return kAttacks[static_cast<std::size_t>(a) - 1]; }

AttackParams with_timing(AttackParams p) {
    p.emplace("start_ms", 10000);
    p.emplace("period_ms", 5000);
    return p;
}

}  // namespace

std::string_view to_string(AttackId a) { return info(a).code; }
std::string_view attack_name(AttackId a) { return info(a).name; }

std::optional<AttackId> parse_attack(std::string_view text) {
    for (const auto& a : kAttacks) {
        if (a.code == text || a.name == text) return a.id;
    }
    return std::nullopt;
}

const std::vector<AttackId>& all_attacks() {
    static const std::vector<AttackId> all = [] {
        std::vector<AttackId> v;
        for (const auto& a : kAttacks) v.push_back(a.id);
        return v;
    }();
    return all;
}

std::vector<DetectorId> expected_detectors(AttackId a) {
    using D = DetectorId;
    switch (a) {
        case AttackId::A1: return {D::D1};
        case AttackId::A2: return {D::D2};
        case AttackId::A3: return {D::D3};
        case AttackId::A4: return {D::D4};
        case AttackId::A5: return {D::D5};
        case AttackId::A6: return {D::D6};
        case AttackId::A7: return {D::D3};
        case AttackId::A8: return {D::D7, D::D7x};
        case AttackId::A9: return {D::D8};
        case AttackId::A10: return {D::D9};
        case AttackId::A11: return {D::D10, D::D16};
        case AttackId::A12: return {D::D11};
        case AttackId::A13: return {D::D12};
        case AttackId::A14: return {D::D13};
        case AttackId::A15: return {D::D14};
        case AttackId::A16: return {D::D15};
    }
    return {};
}

AttackParamError::AttackParamError(std::string key, const std::string& what)
    : std::invalid_argument(fmt::format("attack parameter '{}': {}", key, what)), key_(std::move(key)) {}

InsufficientPseudonyms::InsufficientPseudonyms(std::size_t have, std::size_t need)
    : std::invalid_argument(fmt::format("attack needs {} pseudonyms, attacker holds {}", need, have)) {}

NoTargetSession::NoTargetSession() : std::invalid_argument("no request to answer") {}

const AttackParams& default_params(AttackId a) {
    static const std::map<AttackId, AttackParams> defaults = {
        {AttackId::A1, with_timing({})},
        {AttackId::A2, with_timing({})},
        {AttackId::A3, with_timing({{"pseudonym_count", 3}, {"ghost_spacing", 7.5}})},
        {AttackId::A4, with_timing({})},
        {AttackId::A5, with_timing({{"speed_kmh", 200}})},
        {AttackId::A6, with_timing({{"lane_offset", 0}})},
        {AttackId::A7, with_timing({{"sub_count", 64}})},
        {AttackId::A8, with_timing({{"staged", 0}, {"victim", 0}, {"send_ms", 0}, {"meet_ms", 0}, {"meeting_lane", 1}})},
        {AttackId::A9, with_timing({{"probability", 1.0}})},
        {AttackId::A10, with_timing({{"speed_kmh", 10}})},
        {AttackId::A11, with_timing({{"width", 2.2}})},
        {AttackId::A12, with_timing({{"width_margin", 0.5}})},
        {AttackId::A13, with_timing({{"length", 31}})},
        {AttackId::A14, with_timing({{"inversion_ms", 1000}})},
        {AttackId::A15, with_timing({{"lead_ms", 1000}})},
        {AttackId::A16, with_timing({{"duration_ms", 120000}})},
    };
    return defaults.at(a);
}

double AttackSpec::param(const std::string& key) const {
    if (auto it = params.find(key); it != params.end()) return it->second;
    const auto& d = default_params(id);
    auto it = d.find(key);
    if (it == d.end()) throw AttackParamError(key, fmt::format("not a parameter of {}", to_string(id)));
    return it->second;
}

void validate_params(const AttackSpec& spec) {
    const auto& defaults = default_params(spec.id);
    for (const auto& [key, value] : spec.params) {
        if (!defaults.contains(key)) throw AttackParamError(key, fmt::format("not a parameter of {}", to_string(spec.id)));
        if (!std::isfinite(value)) throw AttackParamError(key, "must be finite");
    }
    auto require = [&](const std::string& key, bool ok, std::string_view what) {
        if (!ok) throw AttackParamError(key, std::string(what));
    };
    auto integral = [](double v) { return std::floor(v) == v; };
    const double start = spec.param("start_ms");
    const double period = spec.param("period_ms");
    require("start_ms", start >= 0 && integral(start), "must be a non-negative whole number of ms");
    require("period_ms", period > 0 && integral(period), "must be a positive whole number of ms");
    switch (spec.id) {
        case AttackId::A3: {
            const double k = spec.param("pseudonym_count");
            require("pseudonym_count", integral(k) && k >= 2 && k <= 16, "must be an integer in [2, 16]");
            require("ghost_spacing", spec.param("ghost_spacing") > 0, "must be positive");
            break;
        }
        case AttackId::A5:
        case AttackId::A10:
            require("speed_kmh", spec.param("speed_kmh") >= 0, "must be non-negative");
            break;
        case AttackId::A6:
            require("lane_offset", integral(spec.param("lane_offset")) && std::abs(spec.param("lane_offset")) <= 127,
                    "must be an integer in [-127, 127]");
            break;
        case AttackId::A7: {
            const double n = spec.param("sub_count");
            require("sub_count", integral(n) && n >= 2 && n <= double(kMaxSubManeuvers), "must be an integer in [2, 64]");
            break;
        }
        case AttackId::A8: {
            const double staged = spec.param("staged");
            require("staged", staged == 0 || staged == 1, "must be 0 or 1");
            if (staged == 1) {
                require("victim", integral(spec.param("victim")) && spec.param("victim") > 0, "must name a vehicle");
                require("victim", spec.param("victim") != double(spec.attacker.value), "must differ from the attacker");
                require("meet_ms", spec.param("meet_ms") >= spec.param("send_ms") + double(kLaneChangeDuration),
                        "must leave a full lane change after send_ms");
            }
            require("meeting_lane", integral(spec.param("meeting_lane")) && spec.param("meeting_lane") >= 0,
                    "must be a lane index");
            break;
        }
        case AttackId::A9: {
            const double p = spec.param("probability");
            require("probability", p >= 0 && p <= 1, "must lie in [0, 1]");
            break;
        }
        case AttackId::A11: require("width", spec.param("width") > 0, "must be positive"); break;
        case AttackId::A12: require("width_margin", spec.param("width_margin") > 0, "must be positive"); break;
        case AttackId::A13: require("length", spec.param("length") > 0, "must be positive"); break;
        case AttackId::A14: require("inversion_ms", spec.param("inversion_ms") >= 0, "must be non-negative"); break;
        case AttackId::A15: require("lead_ms", spec.param("lead_ms") > 0, "must be positive"); break;
        case AttackId::A16:
            require("duration_ms", spec.param("duration_ms") > 0 && spec.param("duration_ms") < 1e12, "out of range");
            break;
        default: break;
    }
}

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries = {
        {AttackId::A1, "Sends a maneuver message with one of its required fields left out, so receivers cannot parse it.",
         "Reject frames that fail decoding and report the signer.", {H, L, L, L}},
        {AttackId::A2, "Declares one kind of road resource in the type field while the location holds the other kind.",
         "Compare the declared resource kind with the shape of the location data.", {H, L, L, L}},
        {AttackId::A3, "Uses several of its own pseudonyms to stage requests and answers between vehicles that do not exist.",
         "Check with on-board sensors that the claimed vehicles are where they say they are.", {H, H, M, H}},
        {AttackId::A4, "Answers every maneuver request it receives with a refusal.",
         "Watch for a responder refusing unusually many requests in a short period.", {H, H, L, H}},
        {AttackId::A5, "Requests a maneuver whose top speed is far beyond the posted limit.",
         "Compare the requested top speed with the limit and with surrounding traffic.", {H, H, L, H}},
        {AttackId::A6, "Points the lane offset of a requested maneuver at a lane the road does not have.",
         "Look up the target lane in the map before accepting.", {H, M, L, M}},
        {AttackId::A7, "Pads a request with many invented executants and their sub-maneuvers to make processing expensive.",
         "Confirm that every named executant is actually present nearby.", {M, H, H, H}},
        {AttackId::A8, "Assigns two executants road resources that overlap in space and time, setting up a collision.",
         "Reject maneuvers whose sub-maneuvers, or sessions from one requester, claim the same road at the same time.",
         {H, H, L, H}},
        {AttackId::A9, "Stays silent on requests it was asked to answer while still transmitting otherwise.",
         "Show that the silent station was transmitting during the response window.", {H, H, H, H}},
        {AttackId::A10, "Requests a maneuver with a minimum speed far below what traffic on the road allows.",
         "Compare the requested minimum speed with the road type and with surrounding traffic.", {H, H, L, H}},
        {AttackId::A11, "Claims a vehicle width that is believable but does not match the real vehicle.",
         "Cross-check the claimed width against earlier messages and the sender's beacons.", {H, L, M, L}},
        {AttackId::A12, "Claims an executant wider than the lane it drives in.",
         "Compare the claimed width with the lane width.", {H, L, L, L}},
        {AttackId::A13, "Claims an executant longer than any road vehicle.",
         "Bound the claimed length.", {H, L, L, L}},
        {AttackId::A14, "Sets a sub-maneuver to end before it starts.",
         "Require the start time to precede the end time.", {H, L, L, L}},
        {AttackId::A15, "Schedules a sub-maneuver to begin before the message carrying it was created.",
         "Require the start time to follow the message timestamp.", {H, L, L, L}},
        {AttackId::A16, "Reserves road resources for an unreasonably long time.",
         "Bound the duration of a sub-maneuver.", {H, H, L, H}},
    };
    return entries;
}

std::vector<AuditRow> risk_rows(const std::vector<CatalogEntry>& entries) {
    std::vector<AuditRow> rows;
    for (const auto& e : entries) rows.push_back({std::string(to_string(e.id)), std::string(attack_name(e.id)), e.risk});
    return rows;
}

bool is_response_attack(AttackId a) { return a == AttackId::A4 || a == AttackId::A9; }

namespace {

Bytes seal(Mscm m, const PseudonymCredential& cred, Millis now) {
    m.signature.signer_id = cred.station_id;
    m.signature = sign(signing_payload(m), cred, now);
    return encode(m);
}

Bytes seal_hostile(const Mscm& m, const StructuralMutation& mutation, const PseudonymCredential& cred, Millis now) {
    const Bytes body = hostile_payload(m, mutation);
    return seal_frame(body, sign(body, cred, now));
}

std::vector<StationId> recent_neighbours(const AttackerContext& ctx, Millis now) {
    std::vector<StationId> out;
    for (const auto& b : ctx.neighbours) {
        if (b.timestamp + 1000 >= now) out.push_back(b.source_id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Adjacent lane offset that exists on the map (right lane preferred).
int adjacent_offset(const MapModel& map, int lane) {
    if (lane_exists(map, lane, 1)) return 1;
    if (lane_exists(map, lane, -1)) return -1;
    return 0;
}

/// The attacker's own lane-change request, addressed to everyone it hears.
Mscm base_request(const AttackerContext& ctx, Millis now) {
    const auto& me = ctx.credentials->front();
    Mscm m;
    m.msg_type = MscmType::Request;
    m.source_id = me.station_id;
    m.msg_timestamp = now;
    m.maneuver_id = ctx.ids->next(me.station_id);
    m.destination_ids = recent_neighbours(ctx, now);
    m.destination_ids.push_back(me.station_id);
    std::sort(m.destination_ids.begin(), m.destination_ids.end());
    m.executant_ids = std::vector<StationId>{me.station_id};
    Maneuver man;
    man.sub_maneuvers.push_back(
        lane_change_sub(*ctx.self, me.station_id, adjacent_offset(*ctx.map, ctx.self->lane), now));
    m.maneuver = std::move(man);
    return m;
}

Transmit broadcast(Bytes bytes, StationId signer, std::string label, bool beacon = false) {
    return Transmit{std::move(bytes), Broadcast{}, signer, beacon, std::move(label)};
}

bool slot_free(const AttackerContext& ctx, int lane, double s) {
    if (!ctx.perception) return true;
    return std::none_of(ctx.perception->observed.begin(), ctx.perception->observed.end(), [&](const ObservedVehicle& o) {
        return o.lane == lane && std::abs(o.s - s) < 10.0;
    });
}

std::vector<AttackAction> ghost_negotiation(const AttackSpec& spec, const AttackerContext& ctx, AttackState& state,
                                            Millis now, bool periodic) {
    const auto k = static_cast<std::size_t>(spec.param("pseudonym_count"));
    const auto& creds = *ctx.credentials;
    if (creds.size() < k) throw InsufficientPseudonyms(creds.size(), k);
    const double spacing = spec.param("ghost_spacing");
    const auto& map = *ctx.map;
    std::vector<AttackAction> out;
    std::vector<Bsm> ghosts;
    for (std::size_t i = 1; i < k; ++i) {
        const auto& cred = creds[i];
        auto slot = state.ghost_slots.find(cred.station_id);
        const double ahead = spacing * double(i);
        if (slot == state.ghost_slots.end() ||
            !slot_free(ctx, slot->second.first, ctx.self->s + slot->second.second)) {
            // Prefer a lane other than the attacker's own, at an empty spot.
            int chosen = -1;
            for (int d = 1; d <= map.lane_count && chosen < 0; ++d) {
                const int lane = (ctx.self->lane + d) % map.lane_count;
                if (slot_free(ctx, lane, ctx.self->s + ahead)) chosen = lane;
            }
            if (chosen < 0) continue;
            slot = state.ghost_slots.insert_or_assign(cred.station_id, std::pair{chosen, ahead}).first;
        }
        Bsm b{cred.station_id, now, slot->second.first, ctx.self->s + slot->second.second, ctx.self->speed,
              ctx.self->width, ctx.self->length, {}};
        b.signature = sign(bsm_signing_payload(b), cred, now);
        out.push_back(broadcast(encode_bsm(b), cred.station_id, "ghost beacon", true));
        ghosts.push_back(b);
    }
    if (!periodic || ghosts.size() < 2) return out;

    // First ghost asks the second for a lane change; the second agrees.
    const auto& requester = creds[1];
    const auto& responder = creds[2];
    VehicleState fake = *ctx.self;
    fake.lane = ghosts[0].lane;
    fake.s = ghosts[0].s;
    Mscm req;
    req.msg_type = MscmType::Request;
    req.source_id = requester.station_id;
    req.msg_timestamp = now;
    req.maneuver_id = ctx.ids->next(requester.station_id);
    req.destination_ids = {requester.station_id, responder.station_id};
    std::sort(req.destination_ids.begin(), req.destination_ids.end());
    req.executant_ids = std::vector<StationId>{requester.station_id};
    req.maneuver = Maneuver{{lane_change_sub(fake, requester.station_id, adjacent_offset(map, fake.lane), now)}};
    out.push_back(broadcast(seal(req, requester, now), requester.station_id, "ghost request"));
    out.push_back(broadcast(seal(make_response(responder.station_id, req, ReasonCode::Agree(), now), responder, now),
                            responder.station_id, "ghost response"));
    return out;
}

std::vector<AttackAction> overloaded(const AttackSpec& spec, const AttackerContext& ctx, Millis now) {
    const auto n = static_cast<std::size_t>(spec.param("sub_count"));
    const auto& me = ctx.credentials->front();
    Mscm m = base_request(ctx, now);
    auto& subs = m.maneuver->sub_maneuvers;
    const SubManeuver own = subs.front();
    std::set<StationId> taken(m.destination_ids.begin(), m.destination_ids.end());
    std::uniform_int_distribution<std::uint32_t> pick(1, std::numeric_limits<std::uint32_t>::max());
    auto& execs = *m.executant_ids;
    for (std::size_t i = 1; i < n; ++i) {
        StationId ghost;
        do {
            ghost = StationId{pick(*ctx.rng)};
        } while (taken.contains(ghost));
        taken.insert(ghost);
        SubManeuver sub = own;
        sub.executant_id = ghost;
        // Short disjoint segments fanned out ahead of the attacker.
        const int lane = static_cast<int>(i % std::size_t(ctx.map->lane_count));
        const double s0 = ctx.self->s + 5.0 * double(i);
        sub.trr = TargetRoadResource::lane(static_cast<std::int8_t>(lane - ctx.self->lane), s0, s0 + 4.0);
        subs.push_back(sub);
        execs.push_back(ghost);
        m.destination_ids.push_back(ghost);
    }
    return {broadcast(seal(m, me, now), me.station_id, "overloaded request")};
}

std::vector<AttackAction> overlapping(const AttackerContext& ctx, Millis now) {
    const auto& me = ctx.credentials->front();
    std::vector<Bsm> near;
    for (const auto& b : ctx.neighbours) {
        if (b.timestamp + 1000 >= now) near.push_back(b);
    }
    std::sort(near.begin(), near.end(), [&](const Bsm& a, const Bsm& b) {
        const double da = std::abs(a.s - ctx.self->s), db = std::abs(b.s - ctx.self->s);
        return da != db ? da < db : a.source_id < b.source_id;
    });
    if (near.size() < 2) return {};
    Mscm m = base_request(ctx, now);
    const SubManeuver shared = m.maneuver->sub_maneuvers.front();
    m.maneuver->sub_maneuvers.clear();
    m.executant_ids->clear();
    for (int i = 0; i < 2; ++i) {
        SubManeuver sub = shared;
        sub.executant_id = near[i].source_id;
        sub.executant_width = near[i].width;
        sub.executant_length = near[i].length;
        m.maneuver->sub_maneuvers.push_back(sub);
        m.executant_ids->push_back(near[i].source_id);
    }
    return {broadcast(seal(m, me, now), me.station_id, "overlapping request")};
}

constexpr Millis kStagedResendInterval = 300;
constexpr std::uint32_t kStagedResends = 3;

std::vector<AttackAction> staged(const AttackSpec& spec, const AttackerContext& ctx, AttackState& state, Millis now) {
    if (state.staged_done) {
        if (!state.staged_copy || state.staged_resends >= kStagedResends || now < state.staged_next) return {};
        ++state.staged_resends;
        state.staged_next = now + kStagedResendInterval;
        return {*state.staged_copy};
    }
    if (now < Millis(spec.param("send_ms"))) return {};
    const auto victim_id = static_cast<std::uint32_t>(spec.param("victim"));
    auto target = ctx.targets.find(victim_id);
    if (target == ctx.targets.end()) return {};
    auto beacon = std::find_if(ctx.neighbours.begin(), ctx.neighbours.end(),
                               [&](const Bsm& b) { return b.source_id == target->second; });
    if (beacon == ctx.neighbours.end()) return {};
    const auto& me = ctx.credentials->front();
    const Millis meet = Millis(spec.param("meet_ms"));
    const Millis begin = meet - kLaneChangeDuration;
    const double mps = kmh_to_mps(beacon->speed);
    auto s_at = [&](Millis t) { return beacon->s + mps * (double(t) - double(beacon->timestamp)) / 1000.0; };

    SubManeuver sub;
    sub.executant_id = target->second;
    sub.start_time = begin;
    sub.end_time = meet;
    const int offset = static_cast<int>(spec.param("meeting_lane")) - ctx.self->lane;
    sub.trr = TargetRoadResource::lane(static_cast<std::int8_t>(offset), s_at(begin),
                                       std::max(s_at(meet), s_at(begin) + beacon->length));
    sub.min_speed = std::max(0.0, beacon->speed - 20.0);
    sub.max_speed = beacon->speed + 10.0;
    sub.executant_width = beacon->width;
    sub.executant_length = beacon->length;

    Mscm m;
    m.msg_type = MscmType::Request;
    m.source_id = me.station_id;
    m.msg_timestamp = now;
    m.maneuver_id = ctx.ids->next(me.station_id);
    m.destination_ids = {target->second};
    m.executant_ids = std::vector<StationId>{target->second};
    m.maneuver = Maneuver{{sub}};
    state.staged_done = true;
    Transmit tx{seal(m, me, now), Unicast{target->second}, me.station_id, false, "staged request"};
    state.staged_copy = tx;
    state.staged_next = now + kStagedResendInterval;
    return {tx};
}

}  // namespace

std::vector<AttackAction> inject(const AttackSpec& spec, const AttackerContext& ctx, AttackState& state, Millis now) {
    const auto& creds = *ctx.credentials;
    if (creds.empty()) throw InsufficientPseudonyms(0, 1);
    const auto& me = creds.front();
    const Millis start = Millis(spec.param("start_ms"));
    const Millis period = Millis(spec.param("period_ms"));
    if (now < start) return {};

    if (is_response_attack(spec.id)) {
        if (ctx.inbox.empty()) throw NoTargetSession();
        std::vector<AttackAction> out;
        for (const Mscm* req : ctx.inbox) {
            if (spec.id == AttackId::A4) {
                // Duplicates are answered again so the refusal survives losses.
                auto resp = make_response(me.station_id, *req, ReasonCode::Disagree(disagree::kUnspecified), now);
                out.push_back(broadcast(seal(resp, me, now), me.station_id, "blanket refusal"));
                state.answered.insert(req->maneuver_id);
            } else if (!state.answered.contains(req->maneuver_id)) {
                std::bernoulli_distribution silent(spec.param("probability"));
                if (silent(*ctx.rng)) {
                    out.push_back(Suppress{req->maneuver_id, req->source_id});
                    state.answered.insert(req->maneuver_id);
                }
            }
        }
        return out;
    }

    if (spec.id == AttackId::A8 && spec.param("staged") == 1) return staged(spec, ctx, state, now);

    const bool periodic = (now - start) % period == 0;
    if (spec.id == AttackId::A3) {
        if (now % kBeaconInterval != 0) return {};
        auto out = ghost_negotiation(spec, ctx, state, now, periodic);
        if (periodic) ++state.emissions;
        return out;
    }
    if (!periodic) return {};
    ++state.emissions;

    Mscm m = base_request(ctx, now);
    auto& sub = m.maneuver->sub_maneuvers.front();
    switch (spec.id) {
        case AttackId::A1:
            return {broadcast(seal_hostile(m, OmitField{std::string(field::kManeuverId)}, me, now), me.station_id,
                              "field omitted")};
        case AttackId::A2:
            return {broadcast(seal_hostile(m, MismatchTrrTag{}, me, now), me.station_id, "resource tag mismatch")};
        case AttackId::A5: sub.max_speed = spec.param("speed_kmh"); break;
        case AttackId::A6: {
            int offset = static_cast<int>(spec.param("lane_offset"));
            if (offset == 0) offset = ctx.map->lane_count - ctx.self->lane;
            auto& seg = std::get<LaneSegment>(sub.trr.location);
            seg.lane_offset = static_cast<std::int8_t>(std::clamp(offset, -127, 127));
            break;
        }
        case AttackId::A7: return overloaded(spec, ctx, now);
        case AttackId::A8: return overlapping(ctx, now);
        case AttackId::A10:
            sub.min_speed = spec.param("speed_kmh");
            sub.max_speed = std::max(sub.max_speed, sub.min_speed);
            break;
        case AttackId::A11:
            // Alternate the false width with the true one so both the beacon
            // cross-check and the cross-message check have something to see.
            if (state.emissions % 2 == 1) sub.executant_width = spec.param("width");
            break;
        case AttackId::A12: sub.executant_width = ctx.map->lane_width + spec.param("width_margin"); break;
        case AttackId::A13: sub.executant_length = spec.param("length"); break;
        case AttackId::A14: sub.end_time = sub.start_time - std::min<Millis>(sub.start_time, Millis(spec.param("inversion_ms"))); break;
        case AttackId::A15: {
            const Millis lead = Millis(spec.param("lead_ms"));
            const Millis duration = sub.end_time - sub.start_time;
            sub.start_time = now > lead ? now - lead : 0;
            sub.end_time = sub.start_time + duration;
            break;
        }
        case AttackId::A16: sub.end_time = sub.start_time + Millis(spec.param("duration_ms")); break;
        default: break;
    }
    return {broadcast(seal(m, me, now), me.station_id, std::string(attack_name(spec.id)))};
}

std::vector<AttackSpec> fig4_scenario(const Fig4Setup& s) {
    if (s.victim_a == s.victim_b) throw std::invalid_argument("fig4 scenario needs two distinct victims");
    if (s.victim_a == s.attacker || s.victim_b == s.attacker) {
        throw std::invalid_argument("fig4 scenario: the attacker cannot be a victim");
    }
    if (!(s.t1 < s.t2 && s.t2 < s.t3)) throw std::invalid_argument("fig4 scenario needs t1 < t2 < t3");
    if (s.t3 < s.t2 + kLaneChangeDuration) throw std::invalid_argument("fig4 scenario: t3 too close to t2");
    auto spec = [&](LongTermId victim, Millis send) {
        AttackSpec a{AttackId::A8, s.attacker, {}};
        a.params = {{"staged", 1},
                    {"victim", double(victim.value)},
                    {"send_ms", double(send)},
                    {"meet_ms", double(s.t3)},
                    {"meeting_lane", double(s.meeting_lane)},
                    {"start_ms", 0}};
        return a;
    };
    return {spec(s.victim_a, s.t1), spec(s.victim_b, s.t2)};
}

}  // namespace mscs
