#include "mscs/sim/event_log.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <sodium.h>

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace mscs::sim {

using nlohmann::json;

std::string_view to_string(RecordKind k) {
    switch (k) {
        case RecordKind::MsgSent: return "MsgSent";
        case RecordKind::MsgDelivered: return "MsgDelivered";
        case RecordKind::MsgDropped: return "MsgDropped";
        case RecordKind::SessionTransition: return "SessionTransition";
        case RecordKind::Detection: return "Detection";
        case RecordKind::Report: return "Report";
        case RecordKind::Kinematics: return "Kinematics";
    }
    return "?";
}

LogParseError::LogParseError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("log line {}: {}", line, what)) {}

void EventLog::append(std::uint64_t tick, Millis t_ms, RecordBody body) {
    records_.push_back({tick, t_ms, records_.size(), std::move(body)});
}

namespace {

std::string quote(std::string_view s) { return json(std::string(s)).dump(); }

std::string num(double v) {
    if (!std::isfinite(v)) return "null";
    return fmt::format("{}", v);
}

std::string digest_list(const std::vector<MessageDigest>& ds) {
    std::string out = "[";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (i) out += ',';
        out += '"' + ds[i].hex() + '"';
    }
    return out + "]";
}

struct Renderer {
    std::string& out;

    void operator()(const MsgSent& r) const {
        out += fmt::format(R"(,"station":{},"signer":{},"msg_type":{},"maneuver_id":{},"cast":{},"msg":"{}","recipients":{},"bytes":"{}")",
                           r.station, r.signer, quote(r.msg_type), r.maneuver_id, quote(r.cast), r.msg.hex(),
                           r.recipients, to_hex(r.bytes));
    }
    void operator()(const MsgDelivered& r) const {
        out += fmt::format(R"(,"station":{},"msg":"{}","sent_at":{},"cost":{})", r.station, r.msg.hex(), r.sent_at,
                           num(r.cost));
    }
    void operator()(const MsgDropped& r) const {
        out += fmt::format(R"(,"station":{},"msg":"{}","sent_at":{})", r.station, r.msg.hex(), r.sent_at);
    }
    void operator()(const SessionTransitionRec& r) const {
        out += fmt::format(R"(,"station":{},"maneuver_id":{},"from_phase":"{}","to_phase":"{}","cause_msg":{})", r.station,
                           r.maneuver_id, to_string(r.from), to_string(r.to),
                           r.cause ? '"' + r.cause->hex() + '"' : std::string("null"));
    }
    void operator()(const DetectionRec& r) const {
        const auto& e = r.event;
        std::string values = "{";
        for (std::size_t i = 0; i < e.evidence.values.size(); ++i) {
            if (i) values += ',';
            values += quote(e.evidence.values[i].first) + ":" + num(e.evidence.values[i].second);
        }
        values += "}";
        out += fmt::format(
            R"(,"station":{},"reporter":{},"detector":"{}","suspect":{},"message_ref":"{}","session":{},"timestamp":{},"evidence":{{"note":{},"values":{}}},"supporting":{})",
            r.station, r.reporter, to_string(e.detector), e.suspect.value, e.message_ref.hex(),
            e.session ? std::to_string(*e.session) : std::string("null"), e.timestamp, quote(e.evidence.note), values,
            digest_list(e.supporting));
    }
    void operator()(const ReportRec& r) const {
        out += fmt::format(R"(,"station":{},"reporter":{},"suspect":{},"events":{},"messages":{},"revoke_at":{})",
                           r.station, r.reporter, r.suspect, r.events, digest_list(r.messages), r.revoke_at);
    }
    void operator()(const KinematicsRec& r) const {
        out += fmt::format(R"(,"station":{},"lane":{},"s":{},"speed":{},"lateral":{})", r.station, r.lane, num(r.s),
                           num(r.speed), num(r.lateral));
    }
};

MessageDigest read_digest(const json& j) {
    Bytes b;
    if (!j.is_string() || !from_hex(j.get<std::string>(), b) || b.size() != 32) throw std::invalid_argument("bad digest");
    MessageDigest d;
    std::copy(b.begin(), b.end(), d.bytes.begin());
    return d;
}

std::vector<MessageDigest> read_digests(const json& j) {
    std::vector<MessageDigest> out;
    for (const auto& d : j) out.push_back(read_digest(d));
    return out;
}

double read_num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

Phase read_phase(const json& j) {
    const auto s = j.get<std::string>();
    for (auto p : {Phase::AwaitingResponses, Phase::Active, Phase::Rejected, Phase::Cancelled, Phase::Completed,
                   Phase::Expired}) {
        if (to_string(p) == s) return p;
    }
    throw std::invalid_argument("unknown phase " + s);
}

RecordBody read_body(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "MsgSent") {
        MsgSent r;
        r.station = j.at("station");
        r.signer = j.at("signer");
        r.msg_type = j.at("msg_type");
        r.maneuver_id = j.at("maneuver_id");
        r.cast = j.at("cast");
        r.msg = read_digest(j.at("msg"));
        r.recipients = j.at("recipients");
        if (!from_hex(j.at("bytes").get<std::string>(), r.bytes)) throw std::invalid_argument("bad bytes");
        return r;
    }
    if (kind == "MsgDelivered") {
        return MsgDelivered{j.at("station"), read_digest(j.at("msg")), j.at("sent_at"), read_num(j.at("cost"))};
    }
    if (kind == "MsgDropped") return MsgDropped{j.at("station"), read_digest(j.at("msg")), j.at("sent_at")};
    if (kind == "SessionTransition") {
        SessionTransitionRec r{j.at("station"), j.at("maneuver_id"), read_phase(j.at("from_phase")),
                               read_phase(j.at("to_phase")), std::nullopt};
        if (!j.at("cause_msg").is_null()) r.cause = read_digest(j.at("cause_msg"));
        return r;
    }
    if (kind == "Detection") {
        DetectionRec r;
        r.station = j.at("station");
        r.reporter = j.at("reporter");
        auto& e = r.event;
        auto d = parse_detector(j.at("detector").get<std::string>());
        if (!d) throw std::invalid_argument("unknown detector");
        e.detector = *d;
        e.suspect = StationId{j.at("suspect").get<std::uint32_t>()};
        e.message_ref = read_digest(j.at("message_ref"));
        if (!j.at("session").is_null()) e.session = j.at("session").get<std::uint64_t>();
        e.timestamp = j.at("timestamp");
        e.evidence.note = j.at("evidence").at("note");
        for (const auto& [k, v] : j.at("evidence").at("values").items()) e.evidence.values.emplace_back(k, read_num(v));
        e.supporting = read_digests(j.at("supporting"));
        return r;
    }
    if (kind == "Report") {
        return ReportRec{j.at("station"), j.at("reporter"), j.at("suspect"), j.at("events"),
                         read_digests(j.at("messages")), j.at("revoke_at")};
    }
    if (kind == "Kinematics") {
        return KinematicsRec{j.at("station"), j.at("lane"), read_num(j.at("s")), read_num(j.at("speed")),
                             read_num(j.at("lateral"))};
    }
    throw std::invalid_argument("unknown record kind " + kind);
}

template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            fn(json::parse(line));
        } catch (const std::exception& e) {
            throw LogParseError(n, e.what());
        }
    }
}

}  // namespace

std::string render(const LogRecord& r) {
    std::string out = fmt::format(R"({{"tick":{},"t_ms":{},"seq":{},"kind":"{}")", r.tick, r.t_ms, r.seq,
                                  to_string(r.kind()));
    std::visit(Renderer{out}, r.body);
    out += "}\n";
    return out;
}

void EventLog::write(std::ostream& out) const {
    for (const auto& r : records_) out << render(r);
}

std::string EventLog::to_jsonl() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

MessageDigest EventLog::digest() const {
    if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialise");
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    for (const auto& r : records_) {
        const std::string line = render(r);
        crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(line.data()), line.size());
    }
    MessageDigest d;
    crypto_hash_sha256_final(&st, d.bytes.data());
    return d;
}

EventLog EventLog::parse(std::istream& in) {
    EventLog log;
    for_each_line(in, [&](const json& j) {
        LogRecord r{j.at("tick"), j.at("t_ms"), j.at("seq"), read_body(j)};
        log.records_.push_back(std::move(r));
    });
    return log;
}

EventLog EventLog::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
}

void AttributionLog::write(std::ostream& out) const {
    for (const auto& r : records_) {
        out << fmt::format(R"({{"tick":{},"t_ms":{},"what":{},"attack":"{}","attacker":{},"msg":{},"maneuver_id":{},"label":{}}})",
                           r.tick, r.t_ms, quote(r.what), to_string(r.attack), r.attacker,
                           r.msg ? '"' + r.msg->hex() + '"' : std::string("null"), r.maneuver_id, quote(r.label))
            << '\n';
    }
}

AttributionLog AttributionLog::parse(std::istream& in) {
    AttributionLog log;
    for_each_line(in, [&](const json& j) {
        AttributionRecord r;
        r.tick = j.at("tick");
        r.t_ms = j.at("t_ms");
        r.what = j.at("what");
        auto a = parse_attack(j.at("attack").get<std::string>());
        if (!a) throw std::invalid_argument("unknown attack");
        r.attack = *a;
        r.attacker = j.at("attacker");
        if (!j.at("msg").is_null()) r.msg = read_digest(j.at("msg"));
        r.maneuver_id = j.at("maneuver_id");
        r.label = j.at("label");
        log.records_.push_back(std::move(r));
    });
    return log;
}

}  // namespace mscs::sim
