#pragma once

// Misbehavior detectors. Each check_* function is pure; ObserverView holds
// the receiver-local history the checks read, and run_detectors dispatches
// one received input to every enabled detector.

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mscs/codec.hpp"
#include "mscs/identity.hpp"
#include "mscs/protocol.hpp"
#include "mscs/spacetime.hpp"
#include "mscs/world.hpp"

namespace mscs {

enum class DetectorId : std::uint8_t {
    D1, D2, D3, D4, D5, D6, D7, D7x, D8, D9, D10, D11, D12, D13, D14, D15, D16,
};

std::string_view to_string(DetectorId d);    // "D5"
std::string_view detector_name(DetectorId d);  // "MaxSpeedPlausibility"
/// Accepts either the short id or the descriptive name.
std::optional<DetectorId> parse_detector(std::string_view text);
const std::vector<DetectorId>& all_detectors();

struct Evidence {
    std::string note;
    std::vector<std::pair<std::string, double>> values;

    double value(std::string_view key) const;
    friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct DetectionEvent {
    DetectorId detector = DetectorId::D1;
    StationId suspect;
    MessageDigest message_ref;
    std::optional<std::uint64_t> session;
    Millis timestamp = 0;
    Evidence evidence;
    std::vector<MessageDigest> supporting;  // further messages the verdict rests on

    friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

struct DetectorConfig {
    std::set<DetectorId> enabled;  // empty until defaults() or the caller fills it

    double speed_limit_factor = 1.2;
    double min_speed_floor = 5.0;       // km/h
    double min_speed_fraction = 0.25;   // of the average neighbour speed
    double width_tolerance = 0.2;       // m
    double length_tolerance = 0.5;      // m
    double ghost_tolerance = 3.0;       // m
    std::size_t denial_threshold = 3;
    Millis denial_window = 5000;
    double max_length = 30.0;
    Millis max_duration = 60000;
    Millis static_field_window = 30000;
    Millis bsm_window = 10000;
    Millis mscm_window = 30000;
    Millis neighbour_speed_window = 2000;
    int lane_deviation = 1;
    double longitudinal_deviation = 10.0;
    Millis settle_time = 2000;  // after end_time, the executant must sit in the target lane
    double perception_range = 100.0;
    /// Spectators (addressed or not) inspect requests they overhear.
    bool spectators_inspect = true;

    bool on(DetectorId d) const { return enabled.contains(d); }
    /// Every detector except the cross-session extension.
    static DetectorConfig defaults();
};

// ---- pure checks ----------------------------------------------------------

/// Pairs (i, j), i < j, whose time intervals intersect and whose footprints
/// share positive area. Lane offsets are taken relative to a common lane.
std::vector<std::pair<std::size_t, std::size_t>> check_overlap(const Maneuver& m, double lane_width = 3.5);

/// A TRR remembered from a session the observer took part in or overheard.
struct RememberedTrr {
    std::uint64_t maneuver_id = 0;
    StationId requester;
    StationId executant;
    spacetime::Region region;
};

/// Remembered entries that the incoming request collides with: different
/// session, same requester, a different executant, intersecting region.
std::vector<RememberedTrr> check_cross_session_overlap(const std::vector<RememberedTrr>& remembered, const Mscm& req,
                                                       int requester_lane, double lane_width);

struct ResponseRecord {
    Millis timestamp = 0;
    StationId responder;
    StationId requester;
    std::uint64_t maneuver_id = 0;
    bool agree = true;
    MessageDigest digest;
};

/// Disagrees by `responder` that fall in (now - window, now], at most one per
/// session. Returns them when there are at least `threshold` overall or to
/// a single requester; empty otherwise.
std::vector<ResponseRecord> check_denial_rate(const std::vector<ResponseRecord>& history, StationId responder,
                                              Millis now, Millis window, std::size_t threshold);

struct PositionClaim {
    StationId station;
    int lane = 0;
    double s = 0.0;
};

/// Claims inside the snapshot's range with no observed vehicle in the same
/// lane within `tolerance` metres. Out-of-range claims are not judged.
std::vector<PositionClaim> check_ghost(const std::vector<PositionClaim>& claims, const PerceptionSnapshot& snapshot,
                                       double tolerance);

struct PlausibilityContext {
    MapModel map;
    std::optional<double> neighbour_speed;  // km/h, average over the recent window
    bool signer_special = false;
    Millis msg_timestamp = 0;
};

struct Violation {
    DetectorId detector;
    Evidence evidence;
};

/// One violation per bound the sub-maneuver breaks (D5, D9, D11..D15).
std::vector<Violation> check_value_plausibility(const SubManeuver& sub, const PlausibilityContext& ctx,
                                                const DetectorConfig& cfg);

/// Dimension mismatch between a sub-maneuver and its executant's beacon.
std::optional<Evidence> check_dimensions(const SubManeuver& sub, const Bsm& bsm, const DetectorConfig& cfg);

/// Beacon position against the corridor of an Active sub-maneuver.
std::optional<Evidence> check_trajectory(const SubManeuver& sub, int target_lane, const Bsm& bsm,
                                         const DetectorConfig& cfg);

/// The suspect stayed pending although it transmitted inside the response
/// window. `heard` holds (timestamp, digest) of its signed transmissions.
std::optional<std::pair<Millis, MessageDigest>> check_nonresponse(
    const SessionState& expired, StationId suspect, const std::vector<std::pair<Millis, MessageDigest>>& heard,
    Millis response_timeout);

// ---- receiver-local history ----------------------------------------------

struct MscmRecord {
    Mscm msg;
    MessageDigest digest;
    Millis received_at = 0;
};

/// A session the observer knows about, with TRRs resolved to road coordinates.
struct KnownSession {
    SessionState state;
    int requester_lane = 0;
    std::vector<spacetime::Region> regions;  // parallel to state.maneuver.sub_maneuvers
    std::vector<int> target_lanes;           // -1 for geographic TRRs
    bool was_active = false;
};

struct ObserverView {
    StationId self;
    MapModel map;
    const CredentialDirectory* directory = nullptr;
    std::map<Millis, PerceptionSnapshot> perception;
    std::map<StationId, std::deque<std::pair<Bsm, MessageDigest>>> bsms;
    std::deque<MscmRecord> mscms;
    std::vector<ResponseRecord> responses;
    std::map<std::uint64_t, KnownSession> sessions;
    std::set<std::uint64_t> received_requests;
    std::set<std::uint64_t> flagged_requests;
    std::map<StationId, std::vector<std::pair<Millis, MessageDigest>>> heard;

    const Bsm* latest_bsm(StationId id, Millis at_or_before) const;
    std::optional<int> lane_of(StationId id, Millis at_or_before) const;
    std::optional<double> neighbour_speed(Millis now, Millis window) const;
    std::vector<RememberedTrr> remembered_trrs() const;

    /// Drops history older than the configured windows.
    void prune(Millis now, const DetectorConfig& cfg);
};

// ---- dispatch ------------------------------------------------------------

struct MscmInput {
    const Mscm* msg = nullptr;
    MessageDigest digest;
};
struct UndecodableInput {
    DecodeError error;
    StationId signer;  // verified signer of the frame
    MessageDigest digest;
};
struct BsmInput {
    const Bsm* bsm = nullptr;
    MessageDigest digest;
};
struct ExpiredSessionInput {
    const SessionState* session = nullptr;
    Millis response_timeout = 2000;
};
using DetectorInput = std::variant<MscmInput, UndecodableInput, BsmInput, ExpiredSessionInput>;

/// Events for one input, in DetectorId order. Never throws on hostile content.
std::vector<DetectionEvent> run_detectors(const DetectorInput& input, const ObserverView& view,
                                          const DetectorConfig& cfg, Millis now);

/// Prefilter for the honest agreement policy: the first disagree-worthy
/// verdict among D2, D5..D7, D7x, D9, D13..D15 on a request.
std::optional<DetectionEvent> screen_request(const Mscm& req, const MessageDigest& digest, const ObserverView& view,
                                             const DetectorConfig& cfg, Millis now);

// ---- reports ---------------------------------------------------------------

struct MisbehaviorReport {
    StationId reporter;
    StationId suspect;
    std::vector<DetectionEvent> events;
    std::vector<Bytes> included_messages;
    Millis created_at = 0;
};

class MissingEvidence : public std::runtime_error {
public:
    explicit MissingEvidence(const MessageDigest& d);
};

class EvidenceStore {
public:
    void put(const MessageDigest& d, Bytes bytes) { put(d, std::make_shared<const Bytes>(std::move(bytes))); }
    /// Shares the buffer; a frame delivered to many stations is stored once.
    void put(const MessageDigest& d, std::shared_ptr<const Bytes> bytes) { store_.emplace(d, std::move(bytes)); }
    const Bytes* find(const MessageDigest& d) const;
    void evict(const MessageDigest& d) { store_.erase(d); }
    std::size_t size() const { return store_.size(); }

private:
    std::map<MessageDigest, std::shared_ptr<const Bytes>> store_;
};

/// Bundles events against one suspect with every referenced message.
/// Throws std::invalid_argument for an empty or mixed-suspect event list.
MisbehaviorReport generate_report(StationId reporter, const std::vector<DetectionEvent>& events,
                                  const EvidenceStore& store, Millis now);

}  // namespace mscs
