#pragma once

// Append-only run log, serialised as JSON Lines with a fixed key order.
// Records stay structured in memory and are only rendered on demand.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mscs/attacks.hpp"
#include "mscs/detection.hpp"
#include "mscs/protocol.hpp"

namespace mscs::sim {

enum class RecordKind { MsgSent, MsgDelivered, MsgDropped, SessionTransition, Detection, Report, Kinematics };
std::string_view to_string(RecordKind k);

struct MsgSent {
    std::uint32_t station = 0;  // long-term id of the transmitting vehicle
    std::uint32_t signer = 0;
    std::string msg_type;        // "BSM", an MSCM type name, or "Undecodable"
    std::uint64_t maneuver_id = 0;
    std::string cast;            // "unicast", "groupcast", "broadcast"
    MessageDigest msg;
    std::uint32_t recipients = 0;
    Bytes bytes;
};

struct MsgDelivered {
    std::uint32_t station = 0;
    MessageDigest msg;
    Millis sent_at = 0;
    double cost = 0.0;  // processing cost units spent on the frame
};

struct MsgDropped {
    std::uint32_t station = 0;
    MessageDigest msg;
    Millis sent_at = 0;
};

struct SessionTransitionRec {
    std::uint32_t station = 0;
    std::uint64_t maneuver_id = 0;
    Phase from = Phase::AwaitingResponses;
    Phase to = Phase::AwaitingResponses;
    std::optional<MessageDigest> cause;
};

struct DetectionRec {
    std::uint32_t station = 0;  // long-term id of the detecting vehicle
    std::uint32_t reporter = 0;  // its pseudonym
    DetectionEvent event;
};

struct ReportRec {
    std::uint32_t station = 0;
    std::uint32_t reporter = 0;
    std::uint32_t suspect = 0;
    std::uint32_t events = 0;
    std::vector<MessageDigest> messages;
    Millis revoke_at = 0;
};

struct KinematicsRec {
    std::uint32_t station = 0;
    int lane = 0;
    double s = 0.0;
    double speed = 0.0;
    double lateral = 0.0;
};

using RecordBody = std::variant<MsgSent, MsgDelivered, MsgDropped, SessionTransitionRec, DetectionRec, ReportRec,
                                KinematicsRec>;

struct LogRecord {
    std::uint64_t tick = 0;
    Millis t_ms = 0;
    std::uint64_t seq = 0;
    RecordBody body;

    RecordKind kind() const { return static_cast<RecordKind>(body.index()); }
};

class LogParseError : public std::runtime_error {
public:
    LogParseError(std::size_t line, const std::string& what);
};

class EventLog {
public:
    void append(std::uint64_t tick, Millis t_ms, RecordBody body);
    const std::vector<LogRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    void write(std::ostream& out) const;
    std::string to_jsonl() const;
    /// SHA-256 over exactly the bytes write() produces.
    MessageDigest digest() const;

    static EventLog parse(std::istream& in);
    static EventLog parse(std::string_view text);

private:
    std::vector<LogRecord> records_;
};

std::string render(const LogRecord& r);

/// Hidden ground truth: which transmissions came from attack code. Kept
/// apart from the event log that detectors and metrics consumers see.
struct AttributionRecord {
    std::uint64_t tick = 0;
    Millis t_ms = 0;
    std::string what;  // "declared", "transmit" or "suppress"
    AttackId attack = AttackId::A1;
    std::uint32_t attacker = 0;
    std::optional<MessageDigest> msg;
    std::uint64_t maneuver_id = 0;
    std::string label;
};

class AttributionLog {
public:
    void append(AttributionRecord r) { records_.push_back(std::move(r)); }
    const std::vector<AttributionRecord>& records() const { return records_; }
    void write(std::ostream& out) const;
    static AttributionLog parse(std::istream& in);

private:
    std::vector<AttributionRecord> records_;
};

}  // namespace mscs::sim
