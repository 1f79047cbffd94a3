#include "mscs/protocol.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace mscs {

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::AwaitingResponses: return "AwaitingResponses";
        case Phase::Active: return "Active";
        case Phase::Rejected: return "Rejected";
        case Phase::Cancelled: return "Cancelled";
        case Phase::Completed: return "Completed";
        case Phase::Expired: return "Expired";
    }
    return "?";
}

std::string_view to_string(Rejection r) {
    switch (r) {
        case Rejection::StaleResponse: return "StaleResponse";
        case Rejection::WrongSession: return "WrongSession";
        case Rejection::WrongMessageType: return "WrongMessageType";
    }
    return "?";
}

bool is_terminal(Phase p) { return p != Phase::AwaitingResponses && p != Phase::Active; }

bool is_allowed_transition(Phase from, Phase to) {
    switch (from) {
        case Phase::AwaitingResponses: return to == Phase::Active || to == Phase::Rejected || to == Phase::Expired;
        case Phase::Active: return to == Phase::Cancelled || to == Phase::Completed;
        default: return false;
    }
}

Millis SessionState::earliest_start() const {
    Millis t = kMaxTimestamp;
    for (const auto& sub : maneuver.sub_maneuvers) t = std::min(t, sub.start_time);
    return t;
}

Millis SessionState::latest_end() const {
    Millis t = 0;
    for (const auto& sub : maneuver.sub_maneuvers) t = std::max(t, sub.end_time);
    return t;
}

std::uint64_t ManeuverIdAllocator::next(StationId requester) {
    const std::uint32_t seq = ++counters_[requester];
    return (static_cast<std::uint64_t>(requester.value) << 32) | seq;
}

namespace {

std::vector<StationId> executants_of(const Maneuver& m) {
    std::vector<StationId> out;
    for (const auto& sub : m.sub_maneuvers) {
        if (std::find(out.begin(), out.end(), sub.executant_id) == out.end()) out.push_back(sub.executant_id);
    }
    return out;
}

SessionState build_session(std::uint64_t id, StationId requester, const Maneuver& maneuver,
                           const std::vector<StationId>& destinations, const std::vector<StationId>& executants,
                           Millis created_at) {
    SessionState s;
    s.maneuver_id = id;
    s.requester = requester;
    s.maneuver = maneuver;
    s.created_at = created_at;
    s.participants.insert(requester);
    for (auto d : destinations) {
        s.participants.insert(d);
        if (d == requester) {
            s.responses.push_back({requester, true});
        } else {
            s.pending.insert(d);
        }
    }
    s.executants.insert(executants.begin(), executants.end());
    s.phase = s.pending.empty() ? Phase::Active : Phase::AwaitingResponses;
    return s;
}

Transition unchanged(const SessionState& s, Rejection why) { return {s, why}; }

}  // namespace

NewSession create_request(StationId requester, Maneuver maneuver, std::vector<StationId> destinations,
                          const CastMode& mode, Millis now, ManeuverIdAllocator& ids) {
    using K = ProtocolError::Kind;
    if (maneuver.sub_maneuvers.empty()) throw ProtocolError(K::EmptyManeuver, "maneuver has no sub-maneuvers");
    for (const auto& sub : maneuver.sub_maneuvers) {
        if (std::find(destinations.begin(), destinations.end(), sub.executant_id) == destinations.end()) {
            throw ProtocolError(K::ExecutantNotAddressed,
                                fmt::format("executant {} is not among the destinations", sub.executant_id.value));
        }
    }
    if (const auto* uni = std::get_if<Unicast>(&mode)) {
        if (destinations.size() != 1 || destinations.front() != uni->target) {
            throw ProtocolError(K::InvalidCastMode, "unicast requires exactly one destination equal to the target");
        }
    }
    auto executants = executants_of(maneuver);

    Mscm req;
    req.msg_type = MscmType::Request;
    req.source_id = requester;
    req.msg_timestamp = now;
    req.maneuver_id = ids.next(requester);
    req.destination_ids = destinations;
    req.executant_ids = executants;
    req.maneuver = maneuver;
    req.signature.signer_id = requester;

    auto session = build_session(req.maneuver_id, requester, maneuver, destinations, executants, now);
    return {std::move(session), std::move(req)};
}

SessionState session_from_request(const Mscm& request) {
    static const Maneuver empty;
    const Maneuver& m = request.maneuver ? *request.maneuver : empty;
    std::vector<StationId> execs = request.executant_ids.value_or(std::vector<StationId>{});
    return build_session(request.maneuver_id, request.source_id, m, request.destination_ids, execs,
                         request.msg_timestamp);
}

Mscm make_response(StationId responder, const Mscm& req, ReasonCode code, Millis now) {
    Mscm resp;
    resp.msg_type = MscmType::Response;
    resp.source_id = responder;
    resp.msg_timestamp = now;
    resp.maneuver_id = req.maneuver_id;
    resp.destination_ids = {req.source_id};
    resp.reason_code = code;
    resp.signature.signer_id = responder;
    return resp;
}

Mscm make_execution_msg(StationId sender, const SessionState& session, ExecutionStatus status, Millis now) {
    Mscm msg;
    msg.msg_type = status == ExecutionStatus::Cancelled ? MscmType::Cancel : MscmType::Complete;
    msg.source_id = sender;
    msg.msg_timestamp = now;
    msg.maneuver_id = session.maneuver_id;
    for (auto p : session.participants) {
        if (p != sender) msg.destination_ids.push_back(p);
    }
    msg.execution_status = status;
    msg.signature.signer_id = sender;
    return msg;
}

Mscm handle_request(const std::vector<Reservation>& own_plan, const Mscm& req, const AgreementPolicy& policy,
                    const RequestContext& ctx, Millis now) {
    using K = ProtocolError::Kind;
    if (req.msg_type != MscmType::Request) throw ProtocolError(K::WrongMessageType, "handle_request expects a Request");
    if (std::find(req.destination_ids.begin(), req.destination_ids.end(), ctx.receiver) == req.destination_ids.end()) {
        throw ProtocolError(K::NotAddressed, fmt::format("station {} is not addressed", ctx.receiver.value));
    }
    const auto& subs = req.maneuver ? req.maneuver->sub_maneuvers : std::vector<SubManeuver>{};
    for (const auto& sub : subs) {
        if (sub.start_time >= sub.end_time) {
            return make_response(ctx.receiver, req, ReasonCode::Disagree(disagree::kImplausible), now);
        }
    }
    if (policy.prefilter) {
        if (auto code = policy.prefilter(req)) return make_response(ctx.receiver, req, ReasonCode::Disagree(*code), now);
    }
    for (const auto& sub : subs) {
        const auto region = spacetime::resolve(sub, ctx.requester_lane, policy.lane_width);
        for (const auto& own : own_plan) {
            if (own.maneuver_id == req.maneuver_id) continue;
            if (spacetime::regions_overlap(region, own.region)) {
                return make_response(ctx.receiver, req, ReasonCode::Disagree(disagree::kOwnPlanConflict), now);
            }
        }
    }
    return make_response(ctx.receiver, req, ReasonCode::Agree(), now);
}

Transition handle_response(const SessionState& session, const Mscm& resp) {
    if (resp.msg_type != MscmType::Response || !resp.reason_code) return unchanged(session, Rejection::WrongMessageType);
    if (resp.maneuver_id != session.maneuver_id) return unchanged(session, Rejection::WrongSession);
    if (session.phase != Phase::AwaitingResponses || !session.pending.contains(resp.source_id)) {
        return unchanged(session, Rejection::StaleResponse);
    }
    Transition t{session, std::nullopt};
    auto& s = t.state;
    s.responses.push_back({resp.source_id, resp.reason_code->agree});
    if (!resp.reason_code->agree) {
        s.phase = Phase::Rejected;
        return t;
    }
    s.pending.erase(resp.source_id);
    if (s.pending.empty()) s.phase = Phase::Active;
    return t;
}

Transition handle_execution_msg(const SessionState& session, const Mscm& msg) {
    if ((msg.msg_type != MscmType::Cancel && msg.msg_type != MscmType::Complete) || !msg.execution_status) {
        return unchanged(session, Rejection::WrongMessageType);
    }
    if (msg.maneuver_id != session.maneuver_id) return unchanged(session, Rejection::WrongSession);
    if (session.phase != Phase::Active || !session.participants.contains(msg.source_id)) {
        return unchanged(session, Rejection::StaleResponse);
    }
    Transition t{session, std::nullopt};
    auto& s = t.state;
    if (msg.msg_type == MscmType::Cancel) {
        s.phase = Phase::Cancelled;
        return t;
    }
    s.acked.insert(msg.source_id);
    if (std::includes(s.acked.begin(), s.acked.end(), s.executants.begin(), s.executants.end())) {
        s.phase = Phase::Completed;
    }
    return t;
}

Transition handle_execution_batch(const SessionState& session, const std::vector<Mscm>& msgs) {
    Transition result{session, std::nullopt};
    bool applied = false;
    for (const auto& m : msgs) {
        if (m.msg_type != MscmType::Cancel) continue;
        auto t = handle_execution_msg(result.state, m);
        if (!t.rejected) return t;
    }
    for (const auto& m : msgs) {
        if (m.msg_type == MscmType::Cancel) continue;
        auto t = handle_execution_msg(result.state, m);
        if (!t.rejected) {
            result.state = std::move(t.state);
            applied = true;
        } else if (!applied) {
            result.rejected = t.rejected;
        }
    }
    if (applied) result.rejected.reset();
    return result;
}

YieldDirective handle_special_announce(const Mscm& msg, const CredentialDirectory& directory) {
    using K = ProtocolError::Kind;
    if (msg.msg_type != MscmType::SpecialAnnounce) {
        throw ProtocolError(K::WrongMessageType, "handle_special_announce expects a SpecialAnnounce");
    }
    if (!directory.is_special(msg.signature.signer_id)) {
        throw ProtocolError(K::NotSpecialVehicle,
                            fmt::format("station {} is not a special vehicle", msg.signature.signer_id.value));
    }
    YieldDirective d;
    d.announcer = msg.source_id;
    if (msg.maneuver) {
        d.corridor = msg.maneuver->sub_maneuvers;
        for (const auto& sub : d.corridor) d.until = std::max(d.until, sub.end_time);
    }
    return d;
}

std::vector<ExpiryEvent> expire_sessions(std::map<std::uint64_t, SessionState>& sessions, Millis now,
                                         const TimerSettings& timers) {
    std::vector<ExpiryEvent> events;
    for (auto& [id, s] : sessions) {
        if (s.phase == Phase::AwaitingResponses && now > s.created_at + timers.response_timeout) {
            events.push_back({id, s.phase, Phase::Expired});
            s.phase = Phase::Expired;
        } else if (s.phase == Phase::Active && !s.maneuver.sub_maneuvers.empty() &&
                   now > s.earliest_start() + timers.start_grace) {
            events.push_back({id, s.phase, Phase::Cancelled});
            s.phase = Phase::Cancelled;
        }
    }
    return events;
}

}  // namespace mscs
