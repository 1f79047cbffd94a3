#include "mscs/sim/metrics.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>

namespace mscs::sim {

std::optional<Millis> AttackMetrics::latency() const {
    if (!first_emission || first_detection.empty()) return std::nullopt;
    Millis first = std::numeric_limits<Millis>::max();
    for (const auto& [d, t] : first_detection) first = std::min(first, t);
    return first - *first_emission;
}

std::optional<Millis> AttackMetrics::latency(DetectorId d) const {
    auto it = first_detection.find(d);
    if (!first_emission || it == first_detection.end()) return std::nullopt;
    return it->second - *first_emission;
}

bool operator==(const RunMetrics& a, const RunMetrics& b) {
    auto key = [](const RunMetrics& m) {
        std::vector<std::tuple<int, std::uint32_t, std::size_t, std::optional<Millis>, std::map<DetectorId, Millis>,
                               std::set<std::uint32_t>, std::size_t, std::size_t>>
            atk;
        for (const auto& x : m.attacks) {
            atk.emplace_back(int(x.attack), x.attacker, x.malicious_actions, x.first_emission, x.first_detection,
                             x.flagged_by, x.silent_sessions, x.silent_sessions_with_traffic);
        }
        return std::tuple(atk, m.detection_events, m.false_positives, m.false_positives_by_detector,
                          m.false_positives_by_station, m.channel.sent, m.channel.delivered, m.channel.dropped,
                          m.processing_cost, m.processing_cost_by_station, m.transitions, m.reports);
    };
    return key(a) == key(b);
}

RunMetrics compute_metrics(const EventLog& log, const AttributionLog& attribution, const MetricsOptions& opt) {
    RunMetrics m;
    std::map<std::uint32_t, std::uint32_t> owner;             // pseudonym -> station
    std::map<std::uint32_t, std::vector<Millis>> sent_by;     // station -> send times
    std::map<std::uint64_t, Millis> request_created;          // maneuver id -> first request send time
    std::set<MessageDigest> sent_digests;

    for (const auto& r : log.records()) {
        if (const auto* s = std::get_if<MsgSent>(&r.body)) {
            ++m.channel.sent;
            owner.emplace(s->signer, s->station);
            sent_by[s->station].push_back(r.t_ms);
            sent_digests.insert(s->msg);
            if (s->msg_type == "Request") request_created.emplace(s->maneuver_id, r.t_ms);
        } else if (const auto* d = std::get_if<MsgDelivered>(&r.body)) {
            ++m.channel.delivered;
            m.processing_cost += d->cost;
            m.processing_cost_by_station[d->station] += d->cost;
        } else if (std::holds_alternative<MsgDropped>(r.body)) {
            ++m.channel.dropped;
        } else if (const auto* t = std::get_if<SessionTransitionRec>(&r.body)) {
            ++m.transitions[t->to];
        } else if (std::holds_alternative<ReportRec>(r.body)) {
            ++m.reports;
        }
    }

    std::set<std::uint32_t> attackers;
    std::map<std::pair<int, std::uint32_t>, std::size_t> index;
    for (const auto& a : attribution.records()) {
        const auto key = std::pair{int(a.attack), a.attacker};
        if (!index.contains(key)) {
            index[key] = m.attacks.size();
            AttackMetrics am;
            am.attack = a.attack;
            am.attacker = a.attacker;
            m.attacks.push_back(am);
        }
        attackers.insert(a.attacker);
        auto& am = m.attacks[index[key]];
        if (a.what == "declared") continue;
        if (a.msg && !sent_digests.contains(*a.msg)) {
            throw LogMismatch(fmt::format("attributed message {} was never sent", a.msg->hex()));
        }
        ++am.malicious_actions;
        if (!am.first_emission || a.t_ms < *am.first_emission) am.first_emission = a.t_ms;
        if (a.what == "suppress") {
            ++am.silent_sessions;
            auto created = request_created.find(a.maneuver_id);
            if (created != request_created.end()) {
                const auto& times = sent_by[a.attacker];
                const bool active = std::any_of(times.begin(), times.end(), [&](Millis t) {
                    return t >= created->second && t <= created->second + opt.response_timeout;
                });
                if (active) ++am.silent_sessions_with_traffic;
            }
        }
    }
    for (auto& am : m.attacks) {
        for (const auto& [pseudo, station] : owner) {
            if (station == am.attacker) am.pseudonyms.insert(pseudo);
        }
    }

    for (const auto& r : log.records()) {
        const auto* det = std::get_if<DetectionRec>(&r.body);
        if (!det) continue;
        ++m.detection_events;
        const auto suspect = det->event.suspect.value;
        auto it = owner.find(suspect);
        const bool attacker_suspect = it != owner.end() && attackers.contains(it->second);
        if (it != owner.end() && !attacker_suspect) {
            ++m.false_positives;
            ++m.false_positives_by_detector[det->event.detector];
            ++m.false_positives_by_station[it->second];
            continue;
        }
        if (!attacker_suspect) continue;
        for (auto& am : m.attacks) {
            if (am.attacker != it->second || !am.first_emission || r.t_ms < *am.first_emission) continue;
            am.first_detection.emplace(det->event.detector, r.t_ms);
            am.flagged_by.insert(det->station);
        }
    }
    return m;
}

std::string metrics_json(const RunMetrics& m) {
    nlohmann::ordered_json doc;
    doc["recall_convention"] =
        "an attacker counts as flagged in a run when any honest vehicle records a detection naming one of its "
        "pseudonyms at or after its first malicious action; recall over a batch is flagged runs divided by runs";
    doc["detection_events"] = m.detection_events;
    doc["false_positives"] = m.false_positives;
    nlohmann::ordered_json fp = nlohmann::ordered_json::object();
    for (const auto& [d, n] : m.false_positives_by_detector) fp[std::string(to_string(d))] = n;
    doc["false_positives_by_detector"] = fp;
    doc["attacks"] = nlohmann::ordered_json::array();
    for (const auto& a : m.attacks) {
        nlohmann::ordered_json det = nlohmann::ordered_json::object();
        for (const auto& [d, t] : a.first_detection) det[std::string(to_string(d))] = t;
        nlohmann::ordered_json j;
        j["attack"] = to_string(a.attack);
        j["attacker"] = a.attacker;
        j["pseudonyms"] = a.pseudonyms;
        j["malicious_actions"] = a.malicious_actions;
        j["first_emission_ms"] = a.first_emission ? nlohmann::ordered_json(*a.first_emission) : nlohmann::ordered_json(nullptr);
        j["first_detection_ms"] = det;
        j["latency_ms"] = a.latency() ? nlohmann::ordered_json(*a.latency()) : nlohmann::ordered_json(nullptr);
        j["flagged"] = a.flagged();
        j["flagged_by"] = a.flagged_by;
        j["silent_sessions"] = a.silent_sessions;
        j["silent_sessions_with_traffic"] = a.silent_sessions_with_traffic;
        doc["attacks"].push_back(j);
    }
    doc["channel"] = {{"sent", m.channel.sent},
                      {"delivered", m.channel.delivered},
                      {"dropped", m.channel.dropped},
                      {"drop_rate", m.channel.drop_rate()}};
    doc["processing_cost"] = m.processing_cost;
    nlohmann::ordered_json tr = nlohmann::ordered_json::object();
    for (const auto& [p, n] : m.transitions) tr[std::string(to_string(p))] = n;
    doc["transitions"] = tr;
    doc["reports"] = m.reports;
    return doc.dump(2) + "\n";
}

std::string metrics_summary(const RunMetrics& m) {
    std::string out = fmt::format("messages sent {}, delivered {}, dropped {} ({:.3f})\n", m.channel.sent,
                                  m.channel.delivered, m.channel.dropped, m.channel.drop_rate());
    out += fmt::format("detections {}, reports {}, false positives {}\n", m.detection_events, m.reports,
                       m.false_positives);
    for (const auto& a : m.attacks) {
        std::vector<std::string> dets;
        for (const auto& [d, t] : a.first_detection) dets.push_back(fmt::format("{}@{}ms", to_string(d), t));
        out += fmt::format("{} by vehicle {}: {} actions, first at {}, {}\n", to_string(a.attack), a.attacker,
                           a.malicious_actions, a.first_emission ? fmt::format("{}ms", *a.first_emission) : "-",
                           dets.empty() ? std::string("not flagged") : fmt::format("flagged {}", fmt::join(dets, " ")));
    }
    out += fmt::format("processing cost {:.0f}\n", m.processing_cost);
    return out;
}

}  // namespace mscs::sim
