#pragma once

// MSCM data model and its canonical tag-length-value encoding.
//
// Frame:  'M' 'S' | total_len:u32le | field*
// Field:  tag:u8 | len:u16le | payload
//
// Top-level fields are emitted in ascending tag order and the signature
// field is always last. The bytes between the frame header and the
// signature field are the signed payload.

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mscs/identity.hpp"
#include "mscs/types.hpp"

namespace mscs {

inline constexpr std::size_t kMaxSubManeuvers = 64;
inline constexpr std::size_t kMaxPolygonVertices = 16;
inline constexpr std::size_t kMaxStationList = 255;
inline constexpr Millis kMaxTimestamp = (Millis{1} << 48) - 1;
/// Road coordinates (lane segment bounds, polygon vertices) beyond this
/// many metres from the origin are rejected.
inline constexpr double kMaxCoordinate = 1e7;

enum class MscmType : std::uint8_t { Request = 0, Response = 1, Cancel = 2, Complete = 3, SpecialAnnounce = 4 };

/// Disagree codes. The protocol carries them opaquely.
namespace disagree {
inline constexpr std::uint8_t kOwnPlanConflict = 0;
inline constexpr std::uint8_t kImplausible = 1;
inline constexpr std::uint8_t kUnspecified = 255;
}  // namespace disagree

struct ReasonCode {
    bool agree = true;
    std::uint8_t code = 0;  // meaningful only when !agree

    static constexpr ReasonCode Agree() { return {true, 0}; }
    static constexpr ReasonCode Disagree(std::uint8_t c) { return {false, c}; }

    friend bool operator==(const ReasonCode& a, const ReasonCode& b) {
        return a.agree == b.agree && (a.agree || a.code == b.code);
    }
};

enum class ExecutionStatus : std::uint8_t { Cancelled = 0, Completed = 1 };

enum class TrrType : std::uint8_t { LaneSegment = 0, GeoRegion = 1 };

struct LaneSegment {
    std::int8_t lane_offset = 0;  // relative to the transmitter's current lane
    double start_s = 0.0;
    double end_s = 0.0;

    friend bool operator==(const LaneSegment&, const LaneSegment&) = default;
};

struct Point {
    double x = 0.0;  // along the road
    double y = 0.0;  // lateral, from the right road edge

    friend bool operator==(const Point&, const Point&) = default;
};

struct GeoRegion {
    std::vector<Point> polygon;

    friend bool operator==(const GeoRegion&, const GeoRegion&) = default;
};

struct TargetRoadResource {
    TrrType trr_type = TrrType::LaneSegment;
    std::variant<LaneSegment, GeoRegion> location;

    static TargetRoadResource lane(std::int8_t offset, double start_s, double end_s) {
        return {TrrType::LaneSegment, LaneSegment{offset, start_s, end_s}};
    }
    static TargetRoadResource region(std::vector<Point> polygon) {
        return {TrrType::GeoRegion, GeoRegion{std::move(polygon)}};
    }

    friend bool operator==(const TargetRoadResource&, const TargetRoadResource&) = default;
};

enum class SubManeuverStatus : std::uint8_t { Proposed = 0, Accepted = 1, Executing = 2 };

struct SubManeuver {
    StationId executant_id;
    SubManeuverStatus current_status = SubManeuverStatus::Proposed;
    TargetRoadResource trr;
    Millis start_time = 0;
    Millis end_time = 0;
    double min_speed = 0.0;  // km/h
    double max_speed = 0.0;  // km/h
    double executant_width = 0.0;   // m
    double executant_length = 0.0;  // m

    friend bool operator==(const SubManeuver&, const SubManeuver&) = default;
};

struct Maneuver {
    std::vector<SubManeuver> sub_maneuvers;

    friend bool operator==(const Maneuver&, const Maneuver&) = default;
};

struct Mscm {
    MscmType msg_type = MscmType::Request;
    StationId source_id;
    Millis msg_timestamp = 0;
    std::uint64_t maneuver_id = 0;
    std::vector<StationId> destination_ids;
    std::optional<std::vector<StationId>> executant_ids;
    std::optional<Maneuver> maneuver;
    std::optional<ReasonCode> reason_code;
    std::optional<ExecutionStatus> execution_status;
    SignatureEnvelope signature;

    friend bool operator==(const Mscm&, const Mscm&) = default;
};

/// Wire field names, as used in error reports and hostile mutations.
namespace field {
inline constexpr std::string_view kMsgType = "msg_type";
inline constexpr std::string_view kManeuver = "maneuver";
inline constexpr std::string_view kReasonCode = "reason_code";
inline constexpr std::string_view kDestinationIds = "destination_ids";
inline constexpr std::string_view kExecutantIds = "executant_ids";
inline constexpr std::string_view kManeuverId = "maneuver_id";
inline constexpr std::string_view kExecutionStatus = "execution_status";
inline constexpr std::string_view kSourceId = "source_id";
inline constexpr std::string_view kMsgTimestamp = "msg_timestamp";
inline constexpr std::string_view kSignature = "signature";
}  // namespace field

enum class CodecErrorKind {
    Truncated,
    MissingMandatory,
    IllegalField,
    BadTag,
    TrrMismatch,
    BadLength,
    BadValue,
};

std::string_view to_string(CodecErrorKind k);
std::string_view to_string(MscmType t);

struct DecodeError {
    CodecErrorKind kind = CodecErrorKind::Truncated;
    std::string field;  // empty when not field-specific

    std::string describe() const;
    friend bool operator==(const DecodeError&, const DecodeError&) = default;
};

/// Thrown by encode() when a message violates the field-presence matrix
/// or a structural invariant.
class StructuralError : public std::invalid_argument {
public:
    explicit StructuralError(DecodeError error);
    const DecodeError& error() const { return error_; }

private:
    DecodeError error_;
};

class UnsupportedMutation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct OmitField {
    std::string name;
};
struct MismatchTrrTag {};
using StructuralMutation = std::variant<OmitField, MismatchTrrTag>;

/// Structural validation shared by encode and decode. Returns the first
/// violation in canonical field order.
std::optional<DecodeError> validate(const Mscm& msg);

/// Canonical bytes of every field except the signature.
Bytes signing_payload(const Mscm& msg);

/// Full frame including the signature field. Throws StructuralError.
Bytes encode(const Mscm& msg);

/// Wraps an already-encoded field sequence and its signature into a frame.
Bytes seal_frame(ByteView body, const SignatureEnvelope& sig);

/// Field sequence that a conforming decoder must reject. Throws
/// UnsupportedMutation when the mutation cannot apply to msg.msg_type.
Bytes hostile_payload(const Mscm& msg, const StructuralMutation& mutation);

/// seal_frame(hostile_payload(msg, mutation), msg.signature).
Bytes encode_hostile(const Mscm& msg, const StructuralMutation& mutation);

class DecodeResult {
public:
    DecodeResult(Mscm m) : value_(std::move(m)) {}
    DecodeResult(DecodeError e) : value_(std::move(e)) {}

    bool ok() const { return std::holds_alternative<Mscm>(value_); }
    explicit operator bool() const { return ok(); }
    const Mscm& value() const { return std::get<Mscm>(value_); }
    Mscm& value() { return std::get<Mscm>(value_); }
    const DecodeError& error() const { return std::get<DecodeError>(value_); }

private:
    std::variant<Mscm, DecodeError> value_;
};

/// Total over arbitrary input: never throws for malformed bytes.
DecodeResult decode(ByteView bytes);

/// Lenient frame walk that locates the signature without validating any
/// other field, so undecodable but signed messages remain attributable.
struct SignedView {
    ByteView body;
    SignatureEnvelope signature;
};
std::optional<SignedView> peek_signed(ByteView bytes);

inline constexpr std::uint8_t kMscmMagic0 = 'M';
inline constexpr std::uint8_t kMscmMagic1 = 'S';

}  // namespace mscs
