#include "mscs/sim/config.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mscs::sim {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", path.empty() ? "<root>" : path, what)), path_(std::move(path)) {}

namespace {

/// JSON object cursor that remembers where it is and rejects unknown keys.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const {
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void get(const std::string& key, T& out) const {
        if (!has(key)) return;
        const json& v = raw(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
                out = v.get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
                    throw ConfigError(at(key), "expected an integer");
                }
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(at(key), "must be non-negative");
                    if (v.is_number_float() && v.get<double>() < 0) throw ConfigError(at(key), "must be non-negative");
                }
                out = v.get<T>();
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(at(key), "expected a number");
                out = v.get<T>();
            } else {
                if (!v.is_string()) throw ConfigError(at(key), "expected a string");
                out = v.get<T>();
            }
        } catch (const json::exception& e) {
            throw ConfigError(at(key), e.what());
        }
    }

    Node child(const std::string& key) const { return Node(raw(key), at(key)); }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!used_.contains(k)) throw ConfigError(at(k), "unknown key");
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    mutable std::set<std::string> used_;
};

void read_map(const Node& n, MapModel& m) {
    n.get("lane_count", m.lane_count);
    n.get("lane_width", m.lane_width);
    n.get("speed_limit", m.speed_limit);
    n.get("road_length", m.road_length);
    n.get("highway", m.highway);
    n.finish();
}

VehicleConfig read_vehicle(const Node& n) {
    VehicleConfig v;
    if (!n.has("id")) throw ConfigError(n.at("id"), "missing");
    n.get("id", v.id.value);
    n.get("lane", v.lane);
    n.get("s", v.s);
    n.get("speed", v.speed);
    n.get("width", v.width);
    n.get("length", v.length);
    n.get("special", v.is_special);
    n.get("credentials", v.credentials);
    n.finish();
    return v;
}

AttackSpec read_attack(const Node& n) {
    AttackSpec a;
    std::string id;
    if (!n.has("id")) throw ConfigError(n.at("id"), "missing");
    n.get("id", id);
    auto parsed = parse_attack(id);
    if (!parsed) throw ConfigError(n.at("id"), fmt::format("unknown attack '{}'", id));
    a.id = *parsed;
    if (!n.has("attacker")) throw ConfigError(n.at("attacker"), "missing");
    n.get("attacker", a.attacker.value);
    if (n.has("params")) {
        Node p = n.child("params");
        for (const auto& [k, v] : n.raw("params").items()) {
            double value = 0;
            p.get(k, value);
            a.params[k] = value;
        }
        p.finish();
    }
    n.finish();
    try {
        validate_params(a);
    } catch (const AttackParamError& e) {
        throw ConfigError(n.at("params." + e.key()), e.what());
    }
    return a;
}

void read_detectors(const Node& n, DetectorConfig& d) {
    if (n.has("enabled")) {
        const json& list = n.raw("enabled");
        if (list.is_string() && list.get<std::string>() == "all") {
            for (auto id : all_detectors()) d.enabled.insert(id);
        } else if (list.is_array()) {
            d.enabled.clear();
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string path = fmt::format("{}[{}]", n.at("enabled"), i);
                if (!list[i].is_string()) throw ConfigError(path, "expected a detector id");
                auto id = parse_detector(list[i].get<std::string>());
                if (!id) throw ConfigError(path, fmt::format("unknown detector '{}'", list[i].get<std::string>()));
                d.enabled.insert(*id);
            }
        } else {
            throw ConfigError(n.at("enabled"), "expected \"all\" or a list of detector ids");
        }
    }
    n.get("spectators_inspect", d.spectators_inspect);
    if (n.has("thresholds")) {
        Node t = n.child("thresholds");
        t.get("speed_limit_factor", d.speed_limit_factor);
        t.get("min_speed_floor", d.min_speed_floor);
        t.get("min_speed_fraction", d.min_speed_fraction);
        t.get("width_tolerance", d.width_tolerance);
        t.get("length_tolerance", d.length_tolerance);
        t.get("ghost_tolerance", d.ghost_tolerance);
        t.get("denial_threshold", d.denial_threshold);
        t.get("denial_window_ms", d.denial_window);
        t.get("max_length", d.max_length);
        t.get("max_duration_ms", d.max_duration);
        t.get("static_field_window_ms", d.static_field_window);
        t.get("bsm_window_ms", d.bsm_window);
        t.get("mscm_window_ms", d.mscm_window);
        t.get("neighbour_speed_window_ms", d.neighbour_speed_window);
        t.get("lane_deviation", d.lane_deviation);
        t.get("longitudinal_deviation", d.longitudinal_deviation);
        t.get("settle_time_ms", d.settle_time);
        t.finish();
    }
    n.finish();
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", fmt::format("not valid JSON: {}", e.what()));
    }
    ScenarioConfig cfg;
    Node root(doc, "");
    root.get("seed", cfg.seed);
    root.get("duration_ms", cfg.duration_ms);
    root.get("tick_ms", cfg.tick_ms);
    if (root.has("map")) read_map(root.child("map"), cfg.map);
    if (root.has("vehicles")) {
        const json& list = root.raw("vehicles");
        if (!list.is_array()) throw ConfigError("vehicles", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) cfg.vehicles.push_back(read_vehicle(Node(list[i], fmt::format("vehicles[{}]", i))));
    }
    if (root.has("attacks")) {
        const json& list = root.raw("attacks");
        if (!list.is_array()) throw ConfigError("attacks", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) cfg.attacks.push_back(read_attack(Node(list[i], fmt::format("attacks[{}]", i))));
    }
    if (root.has("channel")) {
        Node c = root.child("channel");
        c.get("loss_prob", cfg.channel.loss_prob);
        c.get("latency_ms", cfg.channel.latency_ms);
        c.get("range_m", cfg.channel.range_m);
        c.get("overhear", cfg.channel.overhear);
        c.finish();
    }
    if (root.has("detectors")) read_detectors(root.child("detectors"), cfg.detectors);
    if (root.has("request_generator")) {
        Node r = root.child("request_generator");
        auto& q = cfg.requests;
        r.get("rate_per_min", q.rate_per_min);
        r.get("lead_ms", q.lead_ms);
        r.get("retransmit_ms", q.retransmit_ms);
        r.get("max_retries", q.max_retries);
        r.get("backoff_min_ms", q.backoff_min_ms);
        r.get("backoff_max_ms", q.backoff_max_ms);
        r.get("conflict_backoff_min_ms", q.conflict_backoff_min_ms);
        r.get("conflict_backoff_max_ms", q.conflict_backoff_max_ms);
        r.get("neighbour_horizon_ms", q.neighbour_horizon_ms);
        r.finish();
    }
    if (root.has("perception")) {
        Node p = root.child("perception");
        p.get("range_m", cfg.detectors.perception_range);
        p.get("noise_sigma", cfg.perception_noise);
        p.finish();
    }
    root.get("revocation_delay_ms", cfg.revocation_delay_ms);
    if (root.has("timers")) {
        Node t = root.child("timers");
        t.get("response_timeout_ms", cfg.timers.response_timeout);
        t.get("start_grace_ms", cfg.timers.start_grace);
        t.finish();
    }
    if (root.has("processing_cost")) {
        Node p = root.child("processing_cost");
        p.get("c0", cfg.cost_c0);
        p.get("c1", cfg.cost_c1);
        p.finish();
    }
    root.get("trace_kinematics", cfg.trace_kinematics);
    root.finish();
    validate(cfg);
    return cfg;
}

ScenarioConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", fmt::format("cannot read {}", file));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string to_json(const ScenarioConfig& cfg) {
    json doc;
    doc["seed"] = cfg.seed;
    doc["duration_ms"] = cfg.duration_ms;
    doc["tick_ms"] = cfg.tick_ms;
    doc["map"] = {{"lane_count", cfg.map.lane_count},
                  {"lane_width", cfg.map.lane_width},
                  {"speed_limit", cfg.map.speed_limit},
                  {"road_length", cfg.map.road_length},
                  {"highway", cfg.map.highway}};
    doc["vehicles"] = json::array();
    for (const auto& v : cfg.vehicles) {
        doc["vehicles"].push_back({{"id", v.id.value}, {"lane", v.lane}, {"s", v.s}, {"speed", v.speed},
                                   {"width", v.width}, {"length", v.length}, {"special", v.is_special},
                                   {"credentials", v.credentials}});
    }
    doc["attacks"] = json::array();
    for (const auto& a : cfg.attacks) {
        json params = json::object();
        for (const auto& [k, v] : a.params) params[k] = v;
        doc["attacks"].push_back({{"id", std::string(to_string(a.id))}, {"attacker", a.attacker.value}, {"params", params}});
    }
    doc["channel"] = {{"loss_prob", cfg.channel.loss_prob},
                      {"latency_ms", cfg.channel.latency_ms},
                      {"range_m", cfg.channel.range_m},
                      {"overhear", cfg.channel.overhear}};
    const auto& d = cfg.detectors;
    json enabled = json::array();
    for (auto id : d.enabled) enabled.push_back(std::string(to_string(id)));
    doc["detectors"] = {{"enabled", enabled},
                        {"spectators_inspect", d.spectators_inspect},
                        {"thresholds",
                         {{"speed_limit_factor", d.speed_limit_factor},
                          {"min_speed_floor", d.min_speed_floor},
                          {"min_speed_fraction", d.min_speed_fraction},
                          {"width_tolerance", d.width_tolerance},
                          {"length_tolerance", d.length_tolerance},
                          {"ghost_tolerance", d.ghost_tolerance},
                          {"denial_threshold", d.denial_threshold},
                          {"denial_window_ms", d.denial_window},
                          {"max_length", d.max_length},
                          {"max_duration_ms", d.max_duration},
                          {"static_field_window_ms", d.static_field_window},
                          {"bsm_window_ms", d.bsm_window},
                          {"mscm_window_ms", d.mscm_window},
                          {"neighbour_speed_window_ms", d.neighbour_speed_window},
                          {"lane_deviation", d.lane_deviation},
                          {"longitudinal_deviation", d.longitudinal_deviation},
                          {"settle_time_ms", d.settle_time}}}};
    const auto& q = cfg.requests;
    doc["request_generator"] = {{"rate_per_min", q.rate_per_min},
                                {"lead_ms", q.lead_ms},
                                {"retransmit_ms", q.retransmit_ms},
                                {"max_retries", q.max_retries},
                                {"backoff_min_ms", q.backoff_min_ms},
                                {"backoff_max_ms", q.backoff_max_ms},
                                {"conflict_backoff_min_ms", q.conflict_backoff_min_ms},
                                {"conflict_backoff_max_ms", q.conflict_backoff_max_ms},
                                {"neighbour_horizon_ms", q.neighbour_horizon_ms}};
    doc["perception"] = {{"range_m", d.perception_range}, {"noise_sigma", cfg.perception_noise}};
    doc["revocation_delay_ms"] = cfg.revocation_delay_ms;
    doc["timers"] = {{"response_timeout_ms", cfg.timers.response_timeout}, {"start_grace_ms", cfg.timers.start_grace}};
    doc["processing_cost"] = {{"c0", cfg.cost_c0}, {"c1", cfg.cost_c1}};
    doc["trace_kinematics"] = cfg.trace_kinematics;
    return doc.dump(2) + "\n";
}

void validate(const ScenarioConfig& cfg) {
    if (cfg.tick_ms == 0 || kBeaconInterval % cfg.tick_ms != 0) {
        throw ConfigError("tick_ms", "must be a positive divisor of the 100 ms beacon interval");
    }
    if (cfg.duration_ms == 0 || cfg.duration_ms % cfg.tick_ms != 0) {
        throw ConfigError("duration_ms", "must be a positive multiple of tick_ms");
    }
    if (cfg.map.lane_count < 1) throw ConfigError("map.lane_count", "must be at least 1");
    if (!(cfg.map.lane_width > 0)) throw ConfigError("map.lane_width", "must be positive");
    if (!(cfg.map.speed_limit > 0)) throw ConfigError("map.speed_limit", "must be positive");
    if (!(cfg.map.road_length > 0)) throw ConfigError("map.road_length", "must be positive");
    if (!(cfg.channel.loss_prob >= 0 && cfg.channel.loss_prob <= 1)) {
        throw ConfigError("channel.loss_prob", "must lie in [0, 1]");
    }
    if (cfg.channel.latency_ms % cfg.tick_ms != 0) throw ConfigError("channel.latency_ms", "must be a multiple of tick_ms");
    if (!(cfg.channel.range_m >= 0)) throw ConfigError("channel.range_m", "must be non-negative");
    if (!(cfg.detectors.perception_range >= 0)) throw ConfigError("perception.range_m", "must be non-negative");
    if (!(cfg.perception_noise >= 0)) throw ConfigError("perception.noise_sigma", "must be non-negative");
    if (!(cfg.requests.rate_per_min >= 0)) throw ConfigError("request_generator.rate_per_min", "must be non-negative");
    if (cfg.requests.backoff_min_ms > cfg.requests.backoff_max_ms) {
        throw ConfigError("request_generator.backoff_min_ms", "exceeds backoff_max_ms");
    }
    if (cfg.requests.conflict_backoff_min_ms > cfg.requests.conflict_backoff_max_ms) {
        throw ConfigError("request_generator.conflict_backoff_min_ms", "exceeds conflict_backoff_max_ms");
    }
    if (cfg.requests.retransmit_ms == 0) throw ConfigError("request_generator.retransmit_ms", "must be positive");
    if (cfg.timers.response_timeout == 0) throw ConfigError("timers.response_timeout_ms", "must be positive");

    std::map<std::uint32_t, const VehicleConfig*> by_id;
    for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
        const auto& v = cfg.vehicles[i];
        const std::string at = fmt::format("vehicles[{}]", i);
        if (v.id.value == 0) throw ConfigError(at + ".id", "0 is reserved");
        if (!by_id.emplace(v.id.value, &v).second) throw ConfigError(at + ".id", "duplicate vehicle id");
        if (v.lane < 0 || v.lane >= cfg.map.lane_count) throw ConfigError(at + ".lane", "outside the road");
        if (!(v.speed >= 0)) throw ConfigError(at + ".speed", "must be non-negative");
        if (!(v.width > 0)) throw ConfigError(at + ".width", "must be positive");
        if (!(v.length > 0)) throw ConfigError(at + ".length", "must be positive");
        if (v.credentials < 1) throw ConfigError(at + ".credentials", "must be at least 1");
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> staged_victims;
    for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
        const auto& a = cfg.attacks[i];
        const std::string at = fmt::format("attacks[{}]", i);
        auto it = by_id.find(a.attacker.value);
        if (it == by_id.end()) throw ConfigError(at + ".attacker", "no such vehicle");
        try {
            validate_params(a);
        } catch (const AttackParamError& e) {
            throw ConfigError(at + ".params." + e.key(), e.what());
        }
        if (a.id == AttackId::A3 && it->second->credentials < a.param("pseudonym_count")) {
            throw ConfigError(at + ".params.pseudonym_count",
                              fmt::format("attacker holds only {} credentials", it->second->credentials));
        }
        if (Millis(a.param("period_ms")) % cfg.tick_ms != 0 || Millis(a.param("start_ms")) % cfg.tick_ms != 0) {
            throw ConfigError(at + ".params", "start_ms and period_ms must be multiples of tick_ms");
        }
        if (a.id == AttackId::A8 && a.param("staged") == 1) {
            const auto victim = static_cast<std::uint32_t>(a.param("victim"));
            if (!by_id.contains(victim)) throw ConfigError(at + ".params.victim", "no such vehicle");
            if (!staged_victims.emplace(a.attacker.value, victim).second) {
                throw ConfigError(at + ".params.victim", "the same victim is targeted twice");
            }
            if (a.param("meeting_lane") >= cfg.map.lane_count) {
                throw ConfigError(at + ".params.meeting_lane", "outside the road");
            }
        }
    }
}

std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("MSCS_SEED");
    if (!raw || !*raw) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (errno != 0 || *end != '\0' || raw[0] == '-') throw ConfigError("MSCS_SEED", "expected an unsigned integer");
    return v;
}

ScenarioConfig reference_scenario(std::uint64_t seed, std::vector<AttackSpec> attacks) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    for (std::uint32_t i = 0; i < 6; ++i) {
        VehicleConfig v;
        v.id = LongTermId{i + 1};
        v.lane = static_cast<int>(i % 3);
        v.s = 15.0 * i;
        v.credentials = 1;
        cfg.vehicles.push_back(v);
    }
    for (const auto& a : attacks) {
        if (a.id == AttackId::A3) {
            for (auto& v : cfg.vehicles) {
                if (v.id == a.attacker) v.credentials = std::max<std::uint32_t>(v.credentials, std::uint32_t(a.param("pseudonym_count")));
            }
        }
    }
    cfg.attacks = std::move(attacks);
    return cfg;
}

ScenarioConfig fig4_config(std::uint64_t seed, bool cross_session_detector, bool overhear, const Fig4Setup& setup) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.duration_ms = 20000;
    cfg.requests.rate_per_min = 0;
    cfg.channel.overhear = overhear;
    if (cross_session_detector) cfg.detectors.enabled.insert(DetectorId::D7x);
    // Victims drive side by side in the outer lanes; the others trail or lead.
    const std::vector<std::tuple<std::uint32_t, int, double>> layout = {
        {setup.victim_a.value, 0, 0.0}, {setup.victim_b.value, 2, 0.0}, {setup.attacker.value, 1, -25.0}};
    std::set<std::uint32_t> used;
    for (const auto& [id, lane, s] : layout) {
        VehicleConfig v;
        v.id = LongTermId{id};
        v.lane = lane;
        v.s = s;
        cfg.vehicles.push_back(v);
        used.insert(id);
    }
    std::uint32_t next = 1;
    const std::vector<std::pair<int, double>> others = {{0, -60.0}, {2, -45.0}, {1, 40.0}};
    for (const auto& [lane, s] : others) {
        while (used.contains(next)) ++next;
        VehicleConfig v;
        v.id = LongTermId{next};
        v.lane = lane;
        v.s = s;
        cfg.vehicles.push_back(v);
        used.insert(next);
    }
    cfg.attacks = fig4_scenario(setup);
    return cfg;
}

}  // namespace mscs::sim
