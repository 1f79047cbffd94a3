#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mscs/attacks.hpp"
#include "mscs/detection.hpp"
#include "mscs/protocol.hpp"
#include "mscs/world.hpp"

namespace mscs::sim {

struct VehicleConfig {
    LongTermId id;
    int lane = 0;
    double s = 0.0;
    double speed = 100.0;
    double width = 1.8;
    double length = 4.5;
    bool is_special = false;
    std::uint32_t credentials = 1;
};

struct ChannelConfig {
    double loss_prob = 0.05;
    Millis latency_ms = 100;
    double range_m = 300.0;
    /// Unicast frames are heard by every station in range, not only the target.
    bool overhear = false;
};

struct RequestGeneratorConfig {
    double rate_per_min = 2.0;  // Poisson arrivals per honest vehicle
    Millis lead_ms = kDefaultLead;
    Millis retransmit_ms = 300;
    std::uint32_t max_retries = 3;
    Millis backoff_min_ms = 500;
    Millis backoff_max_ms = 1500;
    /// Backoff after a refusal citing a conflicting plan.
    Millis conflict_backoff_min_ms = 3000;
    Millis conflict_backoff_max_ms = 4500;
    Millis neighbour_horizon_ms = 1000;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    Millis duration_ms = 300000;
    Millis tick_ms = 100;
    MapModel map;
    std::vector<VehicleConfig> vehicles;
    std::vector<AttackSpec> attacks;
    ChannelConfig channel;
    DetectorConfig detectors = DetectorConfig::defaults();
    RequestGeneratorConfig requests;
    double perception_noise = 0.0;  // m, Gaussian on observed positions
    Millis revocation_delay_ms = 0;
    TimerSettings timers;
    double cost_c0 = 1.0;
    double cost_c1 = 1.0;
    bool trace_kinematics = false;
};

/// Carries the JSON path of the offending field, e.g. "vehicles[2].lane".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::string& file);
std::string to_json(const ScenarioConfig& cfg);

/// Throws ConfigError for anything run() cannot honour.
void validate(const ScenarioConfig& cfg);

/// Reads MSCS_SEED; returns nullopt when unset. Throws ConfigError when malformed.
std::optional<std::uint64_t> seed_from_env();

/// Three-lane highway, six vehicles 15 m apart cycling through the lanes,
/// vehicle 6 being the attacker when attacks are given.
ScenarioConfig reference_scenario(std::uint64_t seed, std::vector<AttackSpec> attacks = {});

/// Staged cross-session collision: victims 1 (lane 0) and 3 (lane 2) side
/// by side, attacker 6, no spontaneous requests.
ScenarioConfig fig4_config(std::uint64_t seed, bool cross_session_detector, bool overhear,
                           const Fig4Setup& setup = {LongTermId{6}, LongTermId{1}, LongTermId{3}});

}  // namespace mscs::sim
