#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "mscs/codec.hpp"
#include "mscs/identity.hpp"
#include "mscs/spacetime.hpp"

namespace mscs {

enum class Phase { AwaitingResponses, Active, Rejected, Cancelled, Completed, Expired };

std::string_view to_string(Phase p);
bool is_terminal(Phase p);
/// Edges of the session DAG. Self-loops are not transitions.
bool is_allowed_transition(Phase from, Phase to);

struct RecordedResponse {
    StationId responder;
    bool agree = false;
};

struct SessionState {
    std::uint64_t maneuver_id = 0;
    StationId requester;
    std::set<StationId> participants;  // requester plus every destination
    std::set<StationId> executants;
    Maneuver maneuver;
    Phase phase = Phase::AwaitingResponses;
    std::set<StationId> pending;  // meaningful while AwaitingResponses
    std::set<StationId> acked;    // Complete acknowledgements while Active
    std::vector<RecordedResponse> responses;
    Millis created_at = 0;

    Millis earliest_start() const;
    Millis latest_end() const;
};

struct Unicast {
    StationId target;
};
struct Groupcast {
    double beam_center = 0.0;  // radians, 0 = along the direction of travel
    double beam_width = 0.0;   // radians
    double power = 1.0;        // fraction of nominal range
};
struct Broadcast {};
using CastMode = std::variant<Unicast, Groupcast, Broadcast>;

class ProtocolError : public std::invalid_argument {
public:
    enum class Kind { EmptyManeuver, ExecutantNotAddressed, InvalidCastMode, NotAddressed, NotSpecialVehicle, WrongMessageType };
    ProtocolError(Kind kind, std::string what) : std::invalid_argument(std::move(what)), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Why a message left a session unchanged.
enum class Rejection { StaleResponse, WrongSession, WrongMessageType };
std::string_view to_string(Rejection r);

struct Transition {
    SessionState state;
    std::optional<Rejection> rejected;  // set when the input was ignored

    bool changed_phase(Phase before) const { return state.phase != before; }
};

/// Allocates session identifiers: requester id in the high 32 bits,
/// a per-requester monotone counter in the low 32 bits.
class ManeuverIdAllocator {
public:
    std::uint64_t next(StationId requester);

private:
    std::map<StationId, std::uint32_t> counters_;
};

struct NewSession {
    SessionState session;
    Mscm request;  // unsigned; the caller seals it
};

NewSession create_request(StationId requester, Maneuver maneuver, std::vector<StationId> destinations,
                          const CastMode& mode, Millis now, ManeuverIdAllocator& ids);

/// Session as seen by a station that received (or overheard) a Request.
SessionState session_from_request(const Mscm& request);

/// One of the receiver's own space-time reservations, already in absolute road coordinates.
struct Reservation {
    std::uint64_t maneuver_id = 0;
    spacetime::Region region;
};

struct AgreementPolicy {
    double lane_width = 3.5;
    /// Extra plausibility screening run before the conflict check. Returns
    /// a disagree code to refuse, nullopt to let the request through.
    std::function<std::optional<std::uint8_t>(const Mscm&)> prefilter;
};

struct RequestContext {
    StationId receiver;
    int requester_lane = 0;  // lane the request's offsets are relative to
};

/// Response an honest participant sends to `req`.
Mscm handle_request(const std::vector<Reservation>& own_plan, const Mscm& req, const AgreementPolicy& policy,
                    const RequestContext& ctx, Millis now);

Transition handle_response(const SessionState& session, const Mscm& resp);

Transition handle_execution_msg(const SessionState& session, const Mscm& msg);

/// Applies every Cancel/Complete that arrived in one tick. A valid Cancel
/// takes precedence over Completes delivered alongside it.
Transition handle_execution_batch(const SessionState& session, const std::vector<Mscm>& msgs);

struct YieldDirective {
    StationId announcer;
    std::vector<SubManeuver> corridor;  // road resources to vacate
    Millis until = 0;
};

YieldDirective handle_special_announce(const Mscm& msg, const CredentialDirectory& directory);

struct TimerSettings {
    Millis response_timeout = 2000;
    Millis start_grace = 5000;
};

struct ExpiryEvent {
    std::uint64_t maneuver_id = 0;
    Phase from = Phase::AwaitingResponses;
    Phase to = Phase::Expired;
};

/// AwaitingResponses sessions older than the response timeout expire;
/// Active sessions whose earliest start passed by more than the grace
/// period are cancelled.
std::vector<ExpiryEvent> expire_sessions(std::map<std::uint64_t, SessionState>& sessions, Millis now,
                                         const TimerSettings& timers);

Mscm make_response(StationId responder, const Mscm& req, ReasonCode code, Millis now);
Mscm make_execution_msg(StationId sender, const SessionState& session, ExecutionStatus status, Millis now);

}  // namespace mscs
