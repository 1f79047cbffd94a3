#include "mscs/codec.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "mscs/spacetime.hpp"

namespace mscs {

namespace {

// Top-level tags, in the order the fields are introduced by the message description.
enum Tag : std::uint8_t {
    kTagMsgType = 0x01,
    kTagManeuver = 0x02,
    kTagReasonCode = 0x03,
    kTagDestinationIds = 0x04,
    kTagExecutantIds = 0x05,
    kTagManeuverId = 0x06,
    kTagExecutionStatus = 0x07,
    kTagSourceId = 0x08,
    kTagMsgTimestamp = 0x09,
    kTagSignature = 0x0A,
};

enum SubTag : std::uint8_t {
    kTagSubManeuver = 0x10,
    kTagExecutantId = 0x11,
    kTagCurrentStatus = 0x12,
    kTagTrr = 0x13,
    kTagStartTime = 0x14,
    kTagEndTime = 0x15,
    kTagMinSpeed = 0x16,
    kTagMaxSpeed = 0x17,
    kTagExecutantWidth = 0x18,
    kTagExecutantLength = 0x19,
    kTagTrrType = 0x1A,
    kTagTrrLocation = 0x1B,
};

constexpr std::size_t kFrameHeader = 6;
constexpr std::size_t kFieldHeader = 3;
constexpr std::size_t kSignatureLen = 4 + 16;

std::string_view top_field_name(std::uint8_t tag) {
    switch (tag) {
        case kTagMsgType: return field::kMsgType;
        case kTagManeuver: return field::kManeuver;
        case kTagReasonCode: return field::kReasonCode;
        case kTagDestinationIds: return field::kDestinationIds;
        case kTagExecutantIds: return field::kExecutantIds;
        case kTagManeuverId: return field::kManeuverId;
        case kTagExecutionStatus: return field::kExecutionStatus;
        case kTagSourceId: return field::kSourceId;
        case kTagMsgTimestamp: return field::kMsgTimestamp;
        case kTagSignature: return field::kSignature;
        default: return "unknown";
    }
}

std::string_view sub_field_name(std::uint8_t tag) {
    switch (tag) {
        case kTagExecutantId: return "executant_id";
        case kTagCurrentStatus: return "current_status";
        case kTagTrr: return "trr";
        case kTagStartTime: return "start_time";
        case kTagEndTime: return "end_time";
        case kTagMinSpeed: return "min_speed";
        case kTagMaxSpeed: return "max_speed";
        case kTagExecutantWidth: return "executant_width";
        case kTagExecutantLength: return "executant_length";
        case kTagTrrType: return "trr_type";
        case kTagTrrLocation: return "trr_location";
        default: return "unknown";
    }
}

enum class Presence { Mandatory, Situational, Illegal };

Presence presence(MscmType type, std::uint8_t tag) {
    const bool carries_maneuver = type == MscmType::Request || type == MscmType::SpecialAnnounce;
    switch (tag) {
        case kTagManeuver:
        case kTagExecutantIds: return carries_maneuver ? Presence::Mandatory : Presence::Illegal;
        case kTagReasonCode: return type == MscmType::Response ? Presence::Mandatory : Presence::Illegal;
        case kTagExecutionStatus:
            return (type == MscmType::Cancel || type == MscmType::Complete) ? Presence::Mandatory : Presence::Illegal;
        default: return Presence::Mandatory;
    }
}

DecodeError err(CodecErrorKind k, std::string_view f = {}) { return DecodeError{k, std::string(f)}; }

struct DecodeFailure {
    DecodeError error;
};

[[noreturn]] void fail(CodecErrorKind k, std::string_view f = {}) { throw DecodeFailure{err(k, f)}; }

// ---------------------------------------------------------------------------
// Writing

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u48(std::uint64_t v) {
        for (int i = 0; i < 6; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }

    std::size_t begin(std::uint8_t tag) {
        u8(tag);
        std::size_t at = out_.size();
        u16(0);
        return at;
    }
    void end(std::size_t at, std::string_view name) {
        std::size_t len = out_.size() - at - 2;
        if (len > 0xFFFF) throw StructuralError(err(CodecErrorKind::BadLength, name));
        out_[at] = static_cast<std::uint8_t>(len);
        out_[at + 1] = static_cast<std::uint8_t>(len >> 8);
    }

private:
    Bytes& out_;
};

void write_ids(Writer& w, std::uint8_t tag, const std::vector<StationId>& ids, std::string_view name) {
    auto at = w.begin(tag);
    for (auto id : ids) w.u32(id.value);
    w.end(at, name);
}

void write_location(Writer& w, const std::variant<LaneSegment, GeoRegion>& loc) {
    if (const auto* lane = std::get_if<LaneSegment>(&loc)) {
        w.u8(static_cast<std::uint8_t>(TrrType::LaneSegment));
        w.u8(static_cast<std::uint8_t>(lane->lane_offset));
        w.f64(lane->start_s);
        w.f64(lane->end_s);
    } else {
        const auto& geo = std::get<GeoRegion>(loc);
        w.u8(static_cast<std::uint8_t>(TrrType::GeoRegion));
        w.u8(static_cast<std::uint8_t>(geo.polygon.size()));
        for (const auto& p : geo.polygon) {
            w.f64(p.x);
            w.f64(p.y);
        }
    }
}

void write_trr(Writer& w, TrrType type, const std::variant<LaneSegment, GeoRegion>& loc) {
    auto at = w.begin(kTagTrr);
    auto t = w.begin(kTagTrrType);
    w.u8(static_cast<std::uint8_t>(type));
    w.end(t, "trr_type");
    auto l = w.begin(kTagTrrLocation);
    write_location(w, loc);
    w.end(l, "trr_location");
    w.end(at, "trr");
}

template <typename Fn>
void write_scalar(Writer& w, std::uint8_t tag, std::string_view name, Fn&& body) {
    auto at = w.begin(tag);
    body();
    w.end(at, name);
}

void write_sub(Writer& w, const SubManeuver& sub, bool mismatch_trr) {
    auto at = w.begin(kTagSubManeuver);
    write_scalar(w, kTagExecutantId, "executant_id", [&] { w.u32(sub.executant_id.value); });
    write_scalar(w, kTagCurrentStatus, "current_status", [&] { w.u8(static_cast<std::uint8_t>(sub.current_status)); });
    if (mismatch_trr) {
        // Claim LaneSegment but carry a GeoRegion body.
        GeoRegion geo;
        if (const auto* lane = std::get_if<LaneSegment>(&sub.trr.location)) {
            const double y0 = lane->lane_offset * 3.5;
            geo.polygon = {{lane->start_s, y0}, {lane->end_s, y0}, {lane->end_s, y0 + 3.5}, {lane->start_s, y0 + 3.5}};
        } else {
            geo = std::get<GeoRegion>(sub.trr.location);
        }
        write_trr(w, TrrType::LaneSegment, geo);
    } else {
        write_trr(w, sub.trr.trr_type, sub.trr.location);
    }
    write_scalar(w, kTagStartTime, "start_time", [&] { w.u48(sub.start_time); });
    write_scalar(w, kTagEndTime, "end_time", [&] { w.u48(sub.end_time); });
    write_scalar(w, kTagMinSpeed, "min_speed", [&] { w.f64(sub.min_speed); });
    write_scalar(w, kTagMaxSpeed, "max_speed", [&] { w.f64(sub.max_speed); });
    write_scalar(w, kTagExecutantWidth, "executant_width", [&] { w.f64(sub.executant_width); });
    write_scalar(w, kTagExecutantLength, "executant_length", [&] { w.f64(sub.executant_length); });
    w.end(at, "sub_maneuver");
}

struct BodyOptions {
    std::optional<std::uint8_t> omit_tag;
    bool mismatch_trr = false;
};

Bytes write_body(const Mscm& m, const BodyOptions& opt) {
    Bytes out;
    out.reserve(256);
    Writer w(out);
    auto want = [&](std::uint8_t tag) { return !opt.omit_tag || *opt.omit_tag != tag; };

    if (want(kTagMsgType)) write_scalar(w, kTagMsgType, field::kMsgType, [&] { w.u8(static_cast<std::uint8_t>(m.msg_type)); });
    if (m.maneuver && want(kTagManeuver)) {
        auto at = w.begin(kTagManeuver);
        for (std::size_t i = 0; i < m.maneuver->sub_maneuvers.size(); ++i) {
            write_sub(w, m.maneuver->sub_maneuvers[i], opt.mismatch_trr && i == 0);
        }
        w.end(at, field::kManeuver);
    }
    if (m.reason_code && want(kTagReasonCode)) {
        write_scalar(w, kTagReasonCode, field::kReasonCode, [&] {
            if (m.reason_code->agree) {
                w.u8(0);
            } else {
                w.u8(1);
                w.u8(m.reason_code->code);
            }
        });
    }
    if (want(kTagDestinationIds)) write_ids(w, kTagDestinationIds, m.destination_ids, field::kDestinationIds);
    if (m.executant_ids && want(kTagExecutantIds)) write_ids(w, kTagExecutantIds, *m.executant_ids, field::kExecutantIds);
    if (want(kTagManeuverId)) write_scalar(w, kTagManeuverId, field::kManeuverId, [&] { w.u64(m.maneuver_id); });
    if (m.execution_status && want(kTagExecutionStatus)) {
        write_scalar(w, kTagExecutionStatus, field::kExecutionStatus,
                     [&] { w.u8(static_cast<std::uint8_t>(*m.execution_status)); });
    }
    if (want(kTagSourceId)) write_scalar(w, kTagSourceId, field::kSourceId, [&] { w.u32(m.source_id.value); });
    if (want(kTagMsgTimestamp)) write_scalar(w, kTagMsgTimestamp, field::kMsgTimestamp, [&] { w.u48(m.msg_timestamp); });
    return out;
}

// ---------------------------------------------------------------------------
// Reading

class Reader {
public:
    Reader(ByteView data, std::string_view context) : data_(data), context_(context) {}

    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n) const {
        if (remaining() < n) fail(CodecErrorKind::Truncated, context_);
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint64_t uint_n(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_n(4)); }
    std::uint64_t u48() { return uint_n(6); }
    std::uint64_t u64() { return uint_n(8); }
    double f64() { return std::bit_cast<double>(u64()); }

    ByteView take(std::size_t n) {
        need(n);
        ByteView v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

    struct Field {
        std::uint8_t tag;
        ByteView payload;
    };
    Field field() {
        need(kFieldHeader);
        std::uint8_t tag = u8();
        std::uint16_t len = u16();
        return {tag, take(len)};
    }

private:
    ByteView data_;
    std::size_t pos_ = 0;
    std::string_view context_;
};

void expect_len(const Reader::Field& f, std::size_t n, std::string_view name) {
    if (f.payload.size() < n) fail(CodecErrorKind::Truncated, name);
    if (f.payload.size() != n) fail(CodecErrorKind::BadLength, name);
}

double finite(double v, std::string_view name) {
    if (!std::isfinite(v)) fail(CodecErrorKind::BadValue, name);
    return v;
}

std::vector<StationId> read_ids(const Reader::Field& f, std::string_view name) {
    if (f.payload.size() % 4 != 0 || f.payload.size() / 4 > kMaxStationList) fail(CodecErrorKind::BadLength, name);
    Reader r(f.payload, name);
    std::vector<StationId> ids;
    ids.reserve(f.payload.size() / 4);
    while (!r.done()) ids.push_back(StationId{r.u32()});
    return ids;
}

TargetRoadResource read_trr(ByteView payload) {
    Reader r(payload, "trr");
    std::optional<std::uint8_t> type;
    std::optional<std::variant<LaneSegment, GeoRegion>> loc;
    std::optional<std::uint8_t> loc_tag;
    int last = -1;
    while (!r.done()) {
        auto f = r.field();
        if (f.tag <= last) fail(CodecErrorKind::BadTag, "trr");
        last = f.tag;
        if (f.tag == kTagTrrType) {
            expect_len(f, 1, "trr_type");
            type = f.payload[0];
            if (*type > 1) fail(CodecErrorKind::BadValue, "trr_type");
        } else if (f.tag == kTagTrrLocation) {
            Reader lr(f.payload, "trr_location");
            loc_tag = lr.u8();
            if (*loc_tag == static_cast<std::uint8_t>(TrrType::LaneSegment)) {
                LaneSegment seg;
                seg.lane_offset = static_cast<std::int8_t>(lr.u8());
                seg.start_s = finite(lr.f64(), "trr_location");
                seg.end_s = finite(lr.f64(), "trr_location");
                loc = seg;
            } else if (*loc_tag == static_cast<std::uint8_t>(TrrType::GeoRegion)) {
                GeoRegion geo;
                std::size_t n = lr.u8();
                if (n > kMaxPolygonVertices) fail(CodecErrorKind::BadLength, "trr_location");
                geo.polygon.reserve(n);
                for (std::size_t i = 0; i < n; ++i) {
                    double x = finite(lr.f64(), "trr_location");
                    double y = finite(lr.f64(), "trr_location");
                    geo.polygon.push_back({x, y});
                }
                loc = std::move(geo);
            } else {
                fail(CodecErrorKind::BadValue, "trr_location");
            }
            if (!lr.done()) fail(CodecErrorKind::BadLength, "trr_location");
        } else {
            fail(CodecErrorKind::BadTag, "trr");
        }
    }
    if (!type) fail(CodecErrorKind::MissingMandatory, "trr_type");
    if (!loc) fail(CodecErrorKind::MissingMandatory, "trr_location");
    if (*type != *loc_tag) fail(CodecErrorKind::TrrMismatch, "trr");
    return TargetRoadResource{static_cast<TrrType>(*type), std::move(*loc)};
}

SubManeuver read_sub(ByteView payload) {
    Reader r(payload, "sub_maneuver");
    SubManeuver sub;
    unsigned seen = 0;
    int last = -1;
    while (!r.done()) {
        auto f = r.field();
        if (f.tag <= last || f.tag < kTagExecutantId || f.tag > kTagExecutantLength) {
            fail(CodecErrorKind::BadTag, "sub_maneuver");
        }
        last = f.tag;
        const auto name = sub_field_name(f.tag);
        Reader fr(f.payload, name);
        switch (f.tag) {
            case kTagExecutantId:
                expect_len(f, 4, name);
                sub.executant_id = StationId{fr.u32()};
                break;
            case kTagCurrentStatus: {
                expect_len(f, 1, name);
                auto v = fr.u8();
                if (v > 2) fail(CodecErrorKind::BadValue, name);
                sub.current_status = static_cast<SubManeuverStatus>(v);
                break;
            }
            case kTagTrr: sub.trr = read_trr(f.payload); break;
            case kTagStartTime:
                expect_len(f, 6, name);
                sub.start_time = fr.u48();
                break;
            case kTagEndTime:
                expect_len(f, 6, name);
                sub.end_time = fr.u48();
                break;
            case kTagMinSpeed:
                expect_len(f, 8, name);
                sub.min_speed = finite(fr.f64(), name);
                break;
            case kTagMaxSpeed:
                expect_len(f, 8, name);
                sub.max_speed = finite(fr.f64(), name);
                break;
            case kTagExecutantWidth:
                expect_len(f, 8, name);
                sub.executant_width = finite(fr.f64(), name);
                break;
            case kTagExecutantLength:
                expect_len(f, 8, name);
                sub.executant_length = finite(fr.f64(), name);
                break;
        }
        seen |= 1u << (f.tag - kTagExecutantId);
    }
    for (std::uint8_t t = kTagExecutantId; t <= kTagExecutantLength; ++t) {
        if (!(seen & (1u << (t - kTagExecutantId)))) fail(CodecErrorKind::MissingMandatory, sub_field_name(t));
    }
    return sub;
}

Maneuver read_maneuver(ByteView payload) {
    Reader r(payload, field::kManeuver);
    Maneuver m;
    while (!r.done()) {
        auto f = r.field();
        if (f.tag != kTagSubManeuver) fail(CodecErrorKind::BadTag, field::kManeuver);
        if (m.sub_maneuvers.size() == kMaxSubManeuvers) fail(CodecErrorKind::BadLength, field::kManeuver);
        m.sub_maneuvers.push_back(read_sub(f.payload));
    }
    return m;
}

struct FrameFields {
    ByteView body;
    std::optional<ByteView> signature;
};

// Validates the frame header and returns the field area.
ByteView frame_body(ByteView bytes) {
    if (bytes.size() < kFrameHeader) fail(CodecErrorKind::Truncated, "frame");
    if (bytes[0] != kMscmMagic0 || bytes[1] != kMscmMagic1) fail(CodecErrorKind::BadTag, "frame");
    std::uint32_t total = static_cast<std::uint32_t>(bytes[2]) | (static_cast<std::uint32_t>(bytes[3]) << 8) |
                          (static_cast<std::uint32_t>(bytes[4]) << 16) | (static_cast<std::uint32_t>(bytes[5]) << 24);
    if (total < kFrameHeader) fail(CodecErrorKind::BadLength, "frame");
    if (total > bytes.size()) fail(CodecErrorKind::Truncated, "frame");
    if (total < bytes.size()) fail(CodecErrorKind::BadLength, "frame");
    return bytes.subspan(kFrameHeader);
}

bool is_simple_polygon(const std::vector<Point>& poly) { return spacetime::polygon_is_simple(poly); }

}  // namespace

std::string_view to_string(CodecErrorKind k) {
    switch (k) {
        case CodecErrorKind::Truncated: return "Truncated";
        case CodecErrorKind::MissingMandatory: return "MissingMandatory";
        case CodecErrorKind::IllegalField: return "IllegalField";
        case CodecErrorKind::BadTag: return "BadTag";
        case CodecErrorKind::TrrMismatch: return "TrrMismatch";
        case CodecErrorKind::BadLength: return "BadLength";
        case CodecErrorKind::BadValue: return "BadValue";
    }
    return "?";
}

std::string_view to_string(MscmType t) {
    switch (t) {
        case MscmType::Request: return "Request";
        case MscmType::Response: return "Response";
        case MscmType::Cancel: return "Cancel";
        case MscmType::Complete: return "Complete";
        case MscmType::SpecialAnnounce: return "SpecialAnnounce";
    }
    return "?";
}

std::string DecodeError::describe() const {
    if (field.empty()) return std::string(to_string(kind));
    return fmt::format("{}({})", to_string(kind), field);
}

StructuralError::StructuralError(DecodeError error)
    : std::invalid_argument("structural error: " + error.describe()), error_(std::move(error)) {}

std::optional<DecodeError> validate(const Mscm& m) {
    if (static_cast<std::uint8_t>(m.msg_type) > 4) return err(CodecErrorKind::BadValue, field::kMsgType);

    auto present = [&](std::uint8_t tag) {
        switch (tag) {
            case kTagManeuver: return m.maneuver.has_value();
            case kTagReasonCode: return m.reason_code.has_value();
            case kTagExecutantIds: return m.executant_ids.has_value();
            case kTagExecutionStatus: return m.execution_status.has_value();
            default: return true;
        }
    };
    for (std::uint8_t tag = kTagMsgType; tag < kTagSignature; ++tag) {
        auto p = presence(m.msg_type, tag);
        if (p == Presence::Mandatory && !present(tag)) return err(CodecErrorKind::MissingMandatory, top_field_name(tag));
        if (p == Presence::Illegal && present(tag)) return err(CodecErrorKind::IllegalField, top_field_name(tag));
    }

    if (m.maneuver) {
        const auto& subs = m.maneuver->sub_maneuvers;
        if (subs.empty() || subs.size() > kMaxSubManeuvers) return err(CodecErrorKind::BadLength, field::kManeuver);
        for (const auto& sub : subs) {
            if (!sub.executant_id.valid()) return err(CodecErrorKind::BadValue, "executant_id");
            if (static_cast<std::uint8_t>(sub.current_status) > 2) return err(CodecErrorKind::BadValue, "current_status");
            const bool lane = std::holds_alternative<LaneSegment>(sub.trr.location);
            if ((sub.trr.trr_type == TrrType::LaneSegment) != lane) return err(CodecErrorKind::TrrMismatch, "trr");
            if (lane) {
                const auto& seg = std::get<LaneSegment>(sub.trr.location);
                if (!(std::abs(seg.start_s) <= kMaxCoordinate && std::abs(seg.end_s) <= kMaxCoordinate) ||
                    !(seg.start_s < seg.end_s)) {
                    return err(CodecErrorKind::BadValue, "trr_location");
                }
            } else {
                const auto& poly = std::get<GeoRegion>(sub.trr.location).polygon;
                if (poly.size() < 3 || poly.size() > kMaxPolygonVertices) return err(CodecErrorKind::BadLength, "trr_location");
                for (const auto& p : poly) {
                    if (!(std::abs(p.x) <= kMaxCoordinate && std::abs(p.y) <= kMaxCoordinate)) {
                        return err(CodecErrorKind::BadValue, "trr_location");
                    }
                }
                if (!is_simple_polygon(poly)) return err(CodecErrorKind::BadValue, "trr_location");
            }
            if (sub.start_time > kMaxTimestamp) return err(CodecErrorKind::BadValue, "start_time");
            if (sub.end_time > kMaxTimestamp) return err(CodecErrorKind::BadValue, "end_time");
            if (!std::isfinite(sub.min_speed) || sub.min_speed < 0) return err(CodecErrorKind::BadValue, "min_speed");
            if (!std::isfinite(sub.max_speed) || sub.max_speed < 0) return err(CodecErrorKind::BadValue, "max_speed");
            if (!std::isfinite(sub.executant_width)) return err(CodecErrorKind::BadValue, "executant_width");
            if (!std::isfinite(sub.executant_length)) return err(CodecErrorKind::BadValue, "executant_length");
        }
    }
    if (m.destination_ids.size() > kMaxStationList) return err(CodecErrorKind::BadLength, field::kDestinationIds);
    if (m.executant_ids) {
        if (m.executant_ids->size() > kMaxStationList) return err(CodecErrorKind::BadLength, field::kExecutantIds);
        if (m.executant_ids->empty()) return err(CodecErrorKind::BadValue, field::kExecutantIds);
    }
    if (m.execution_status) {
        const bool cancel = m.msg_type == MscmType::Cancel;
        if ((*m.execution_status == ExecutionStatus::Cancelled) != cancel) {
            return err(CodecErrorKind::BadValue, field::kExecutionStatus);
        }
    }
    if (!m.source_id.valid()) return err(CodecErrorKind::BadValue, field::kSourceId);
    if (m.msg_timestamp > kMaxTimestamp) return err(CodecErrorKind::BadValue, field::kMsgTimestamp);

    // Cross-field containment: maneuver executants ⊆ executant_ids ⊆ destination_ids.
    if (m.executant_ids) {
        std::set<StationId> dest(m.destination_ids.begin(), m.destination_ids.end());
        for (auto id : *m.executant_ids) {
            if (!id.valid() || !dest.contains(id)) return err(CodecErrorKind::BadValue, field::kExecutantIds);
        }
        std::set<StationId> exec(m.executant_ids->begin(), m.executant_ids->end());
        for (const auto& sub : m.maneuver->sub_maneuvers) {
            if (!exec.contains(sub.executant_id)) return err(CodecErrorKind::BadValue, field::kManeuver);
        }
    }
    return std::nullopt;
}

Bytes signing_payload(const Mscm& msg) {
    if (auto e = validate(msg)) throw StructuralError(*e);
    return write_body(msg, {});
}

Bytes seal_frame(ByteView body, const SignatureEnvelope& sig) {
    Bytes out;
    const std::size_t total = kFrameHeader + body.size() + kFieldHeader + kSignatureLen;
    out.reserve(total);
    Writer w(out);
    w.u8(kMscmMagic0);
    w.u8(kMscmMagic1);
    w.u32(static_cast<std::uint32_t>(total));
    w.raw(body);
    auto at = w.begin(kTagSignature);
    w.u32(sig.signer_id.value);
    w.raw(sig.tag);
    w.end(at, field::kSignature);
    return out;
}

Bytes encode(const Mscm& msg) { return seal_frame(signing_payload(msg), msg.signature); }

Bytes hostile_payload(const Mscm& msg, const StructuralMutation& mutation) {
    if (auto e = validate(msg)) throw StructuralError(*e);
    BodyOptions opt;
    if (const auto* omit = std::get_if<OmitField>(&mutation)) {
        std::optional<std::uint8_t> tag;
        for (std::uint8_t t = kTagMsgType; t < kTagSignature; ++t) {
            if (top_field_name(t) == omit->name) tag = t;
        }
        if (!tag) throw UnsupportedMutation(fmt::format("cannot omit unknown field '{}'", omit->name));
        if (presence(msg.msg_type, *tag) != Presence::Mandatory) {
            throw UnsupportedMutation(
                fmt::format("{} carries no '{}' field to omit", to_string(msg.msg_type), omit->name));
        }
        opt.omit_tag = tag;
    } else {
        if (!msg.maneuver) {
            throw UnsupportedMutation(fmt::format("{} has no target road resource", to_string(msg.msg_type)));
        }
        opt.mismatch_trr = true;
    }
    return write_body(msg, opt);
}

Bytes encode_hostile(const Mscm& msg, const StructuralMutation& mutation) {
    return seal_frame(hostile_payload(msg, mutation), msg.signature);
}

DecodeResult decode(ByteView bytes) {
    try {
        Reader r(frame_body(bytes), "frame");
        Mscm m;
        unsigned seen = 0;
        int last = -1;
        while (!r.done()) {
            auto f = r.field();
            if (f.tag < kTagMsgType || f.tag > kTagSignature || f.tag <= last) fail(CodecErrorKind::BadTag, "frame");
            last = f.tag;
            seen |= 1u << f.tag;
            const auto name = top_field_name(f.tag);
            Reader fr(f.payload, name);
            switch (f.tag) {
                case kTagMsgType: {
                    expect_len(f, 1, name);
                    auto v = fr.u8();
                    if (v > 4) fail(CodecErrorKind::BadValue, name);
                    m.msg_type = static_cast<MscmType>(v);
                    break;
                }
                case kTagManeuver: m.maneuver = read_maneuver(f.payload); break;
                case kTagReasonCode: {
                    auto kind = fr.u8();
                    if (kind == 0) {
                        expect_len(f, 1, name);
                        m.reason_code = ReasonCode::Agree();
                    } else if (kind == 1) {
                        expect_len(f, 2, name);
                        m.reason_code = ReasonCode::Disagree(fr.u8());
                    } else {
                        fail(CodecErrorKind::BadValue, name);
                    }
                    break;
                }
                case kTagDestinationIds: m.destination_ids = read_ids(f, name); break;
                case kTagExecutantIds: m.executant_ids = read_ids(f, name); break;
                case kTagManeuverId:
                    expect_len(f, 8, name);
                    m.maneuver_id = fr.u64();
                    break;
                case kTagExecutionStatus: {
                    expect_len(f, 1, name);
                    auto v = fr.u8();
                    if (v > 1) fail(CodecErrorKind::BadValue, name);
                    m.execution_status = static_cast<ExecutionStatus>(v);
                    break;
                }
                case kTagSourceId:
                    expect_len(f, 4, name);
                    m.source_id = StationId{fr.u32()};
                    break;
                case kTagMsgTimestamp:
                    expect_len(f, 6, name);
                    m.msg_timestamp = fr.u48();
                    break;
                case kTagSignature:
                    expect_len(f, kSignatureLen, name);
                    m.signature.signer_id = StationId{fr.u32()};
                    std::copy_n(f.payload.begin() + 4, 16, m.signature.tag.begin());
                    break;
            }
        }
        if (!(seen & (1u << kTagMsgType))) return err(CodecErrorKind::MissingMandatory, field::kMsgType);
        for (std::uint8_t tag = kTagManeuver; tag <= kTagSignature; ++tag) {
            const bool has = seen & (1u << tag);
            auto p = tag == kTagSignature ? Presence::Mandatory : presence(m.msg_type, tag);
            if (p == Presence::Mandatory && !has) return err(CodecErrorKind::MissingMandatory, top_field_name(tag));
            if (p == Presence::Illegal && has) return err(CodecErrorKind::IllegalField, top_field_name(tag));
        }
        if (auto e = validate(m)) return *e;
        return m;
    } catch (const DecodeFailure& f) {
        return f.error;
    }
}

std::optional<SignedView> peek_signed(ByteView bytes) {
    if (bytes.size() < kFrameHeader || bytes[0] != kMscmMagic0 || bytes[1] != kMscmMagic1) return std::nullopt;
    std::uint32_t total = static_cast<std::uint32_t>(bytes[2]) | (static_cast<std::uint32_t>(bytes[3]) << 8) |
                          (static_cast<std::uint32_t>(bytes[4]) << 16) | (static_cast<std::uint32_t>(bytes[5]) << 24);
    if (total != bytes.size()) return std::nullopt;
    std::size_t pos = kFrameHeader;
    while (pos + kFieldHeader <= bytes.size()) {
        const std::uint8_t tag = bytes[pos];
        const std::size_t len = bytes[pos + 1] | (bytes[pos + 2] << 8);
        const std::size_t next = pos + kFieldHeader + len;
        if (next > bytes.size()) return std::nullopt;
        if (tag == kTagSignature) {
            if (len != kSignatureLen || next != bytes.size()) return std::nullopt;
            SignedView view;
            view.body = bytes.subspan(kFrameHeader, pos - kFrameHeader);
            const auto* p = bytes.data() + pos + kFieldHeader;
            view.signature.signer_id =
                StationId{static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16)) | (static_cast<std::uint32_t>(p[3]) << 24)};
            std::copy_n(p + 4, 16, view.signature.tag.begin());
            return view;
        }
        pos = next;
    }
    return std::nullopt;
}

}  // namespace mscs
