#pragma once

// Attack catalog and injector. Every injector works from the attacker's
// local view only; the harness tags whatever it emits as attack traffic.

#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mscs/codec.hpp"
#include "mscs/detection.hpp"
#include "mscs/identity.hpp"
#include "mscs/protocol.hpp"
#include "mscs/risk.hpp"
#include "mscs/world.hpp"

namespace mscs {

enum class AttackId : std::uint8_t {
    A1 = 1, A2, A3, A4, A5, A6, A7, A8, A9, A10, A11, A12, A13, A14, A15, A16,
};

std::string_view to_string(AttackId a);    // "A5"
std::string_view attack_name(AttackId a);  // "MaxSpeedTooHigh"
std::optional<AttackId> parse_attack(std::string_view text);
const std::vector<AttackId>& all_attacks();

/// Detectors expected to catch the attack.
std::vector<DetectorId> expected_detectors(AttackId a);

using AttackParams = std::map<std::string, double>;

struct AttackSpec {
    AttackId id = AttackId::A1;
    LongTermId attacker;
    AttackParams params;

    /// Supplied value or the documented default. Throws for unknown keys.
    double param(const std::string& key) const;
};

class AttackParamError : public std::invalid_argument {
public:
    AttackParamError(std::string key, const std::string& what);
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class InsufficientPseudonyms : public std::invalid_argument {
public:
    InsufficientPseudonyms(std::size_t have, std::size_t need);
};

class NoTargetSession : public std::invalid_argument {
public:
    NoTargetSession();
};

/// Default parameters for an attack (common timing keys included).
const AttackParams& default_params(AttackId a);

/// Throws AttackParamError for unknown keys or out-of-range values.
void validate_params(const AttackSpec& spec);

struct CatalogEntry {
    AttackId id;
    std::string description;
    std::string defense;
    RiskAssessment risk;
};

/// All sixteen attacks, ordered by id.
const std::vector<CatalogEntry>& catalog();
std::vector<AuditRow> risk_rows(const std::vector<CatalogEntry>& entries);

// ---- injection -------------------------------------------------------------

struct AttackerContext {
    const MapModel* map = nullptr;
    const VehicleState* self = nullptr;  // the attacker's own vehicle
    const PerceptionSnapshot* perception = nullptr;
    const std::vector<PseudonymCredential>* credentials = nullptr;  // front() is the everyday pseudonym
    std::vector<const Mscm*> inbox;  // requests addressed to the attacker this tick
    std::vector<Bsm> neighbours;     // latest beacon of every pseudonym heard recently
    std::map<std::uint32_t, StationId> targets;  // victim long-term id -> pseudonym, for staged scenarios
    ManeuverIdAllocator* ids = nullptr;
    std::mt19937_64* rng = nullptr;
};

struct Transmit {
    Bytes bytes;
    CastMode mode;
    StationId signer;
    bool beacon = false;
    std::string label;
};

struct Suppress {
    std::uint64_t maneuver_id = 0;
    StationId requester;
};

/// Injector memory carried between ticks.
struct AttackState {
    std::set<std::uint64_t> answered;  // sessions already denied or ignored
    std::map<StationId, std::pair<int, double>> ghost_slots;  // lane, offset from the attacker
    std::uint32_t emissions = 0;
    bool staged_done = false;
    /// The staged request is resent blindly, like an honest requester would.
    std::optional<Transmit> staged_copy;
    Millis staged_next = 0;
    std::uint32_t staged_resends = 0;
};

using AttackAction = std::variant<Transmit, Suppress>;

/// True when the attack acts on requests it receives rather than on a timer.
bool is_response_attack(AttackId a);

/// Actions due at `now`. Response attacks need a nonempty inbox and throw
/// NoTargetSession otherwise.
std::vector<AttackAction> inject(const AttackSpec& spec, const AttackerContext& ctx, AttackState& state, Millis now);

struct Fig4Setup {
    LongTermId attacker;
    LongTermId victim_a;
    LongTermId victim_b;
    Millis t1 = 1000;
    Millis t2 = 2000;
    Millis t3 = 10000;
    int meeting_lane = 1;
};

/// Two staged A8 specs, one unicast request per victim, whose reservations
/// meet at t3. Throws std::invalid_argument unless t1 < t2 < t3 and the
/// victims differ.
std::vector<AttackSpec> fig4_scenario(const Fig4Setup& setup);

}  // namespace mscs
