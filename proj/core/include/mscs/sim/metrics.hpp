#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mscs/sim/event_log.hpp"

namespace mscs::sim {

struct AttackMetrics {
    AttackId attack = AttackId::A1;
    std::uint32_t attacker = 0;
    std::set<std::uint32_t> pseudonyms;  // every signer the attacker's vehicle used
    std::size_t malicious_actions = 0;
    std::optional<Millis> first_emission;
    /// First detection naming one of the attacker's pseudonyms, per detector,
    /// at or after the first malicious emission.
    std::map<DetectorId, Millis> first_detection;
    std::set<std::uint32_t> flagged_by;  // honest stations that flagged the attacker
    /// Suppressed sessions during whose response window the attacker transmitted.
    std::size_t silent_sessions = 0;
    std::size_t silent_sessions_with_traffic = 0;

    bool flagged() const { return !first_detection.empty(); }
    std::optional<Millis> latency() const;
    std::optional<Millis> latency(DetectorId d) const;
};

struct ChannelStats {
    std::size_t sent = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    double drop_rate() const { return delivered + dropped ? double(dropped) / double(delivered + dropped) : 0.0; }
};

struct RunMetrics {
    std::vector<AttackMetrics> attacks;
    std::size_t detection_events = 0;
    std::size_t false_positives = 0;  // detections naming an honest vehicle's pseudonym
    std::map<DetectorId, std::size_t> false_positives_by_detector;
    std::map<std::uint32_t, std::size_t> false_positives_by_station;
    ChannelStats channel;
    double processing_cost = 0.0;
    std::map<std::uint32_t, double> processing_cost_by_station;
    std::map<Phase, std::size_t> transitions;
    std::size_t reports = 0;

    friend bool operator==(const RunMetrics&, const RunMetrics&);
};

class LogMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MetricsOptions {
    Millis response_timeout = 2000;
};

/// Throws LogMismatch when the attribution log names messages the event
/// log never saw sent.
RunMetrics compute_metrics(const EventLog& log, const AttributionLog& attribution, const MetricsOptions& opt = {});

/// JSON document; a sentence documents the recall convention.
std::string metrics_json(const RunMetrics& m);
std::string metrics_summary(const RunMetrics& m);

}  // namespace mscs::sim
