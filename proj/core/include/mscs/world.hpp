#pragma once

// Ground truth for one straight multi-lane road segment: vehicle
// kinematics, map queries, perception snapshots and beacons.

#include <optional>
#include <random>
#include <vector>

#include "mscs/codec.hpp"
#include "mscs/identity.hpp"
#include "mscs/types.hpp"

namespace mscs {

struct MapModel {
    int lane_count = 3;
    double lane_width = 3.5;     // m
    double speed_limit = 130.0;  // km/h
    double road_length = 20000.0;
    bool highway = true;
};

/// True iff observer_lane + lane_offset names a lane of the map.
bool lane_exists(const MapModel& map, int observer_lane, int lane_offset);

inline constexpr Millis kLaneChangeDuration = 3000;
inline constexpr Millis kBeaconInterval = 100;

inline double kmh_to_mps(double kmh) { return kmh / 3.6; }

struct LaneChange {
    int from_lane = 0;
    int to_lane = 0;
    Millis start = 0;
};

struct VehicleState {
    LongTermId long_term;
    int lane = 0;
    double s = 0.0;      // m along the road
    double speed = 0.0;  // km/h
    double width = 1.8;
    double length = 4.5;
    bool is_special = false;
    std::optional<LaneChange> lane_change;

    /// Lateral position of the vehicle centre, from the right road edge.
    double lateral(double lane_width, Millis now) const;
};

struct Bsm {
    StationId source_id;
    Millis timestamp = 0;
    int lane = 0;
    double s = 0.0;
    double speed = 0.0;
    double width = 0.0;
    double length = 0.0;
    SignatureEnvelope signature;

    friend bool operator==(const Bsm&, const Bsm&) = default;
};

Bytes bsm_signing_payload(const Bsm& bsm);
/// 'B' 'S' | signed payload | signer:u32le | tag[16]
Bytes encode_bsm(const Bsm& bsm);
std::optional<Bsm> decode_bsm(ByteView bytes);
/// True when the bytes start with the beacon magic rather than the MSCM one.
bool looks_like_bsm(ByteView bytes);

struct ObservedVehicle {
    int lane = 0;
    double s = 0.0;
    double width = 0.0;
    double length = 0.0;

    friend bool operator==(const ObservedVehicle&, const ObservedVehicle&) = default;
};

struct PerceptionSnapshot {
    LongTermId observer;
    Millis timestamp = 0;
    int observer_lane = 0;
    double observer_s = 0.0;
    double range = 0.0;
    std::vector<ObservedVehicle> observed;  // sorted by s
};

class World {
public:
    World(MapModel map, std::vector<VehicleState> vehicles, Millis now = 0);

    const MapModel& map() const { return map_; }
    Millis now() const { return now_; }
    const std::vector<VehicleState>& vehicles() const { return vehicles_; }  // sorted by long_term
    const VehicleState* find(LongTermId id) const;
    VehicleState* find(LongTermId id);

    /// Schedules a lane change into `to_lane` beginning at `start`. Returns
    /// false when the lane does not exist or a change is already underway.
    bool start_lane_change(LongTermId id, int to_lane, Millis start);

    void step(Millis dt);

private:
    MapModel map_;
    std::vector<VehicleState> vehicles_;
    Millis now_ = 0;
};

inline constexpr Millis kDefaultLead = 2500;

/// Lane change into lane + lane_offset starting `lead` ms from now and
/// lasting one lane-change duration, with the corridor predicted from the
/// vehicle's current speed.
SubManeuver lane_change_sub(const VehicleState& v, StationId executant, int lane_offset, Millis now,
                            Millis lead = kDefaultLead);

/// Advances every vehicle by dt. Throws std::invalid_argument for dt == 0.
void step_kinematics(World& world, Millis dt);

struct PerceptionNoise {
    double position_sigma = 0.0;  // m, Gaussian on s
    std::mt19937_64* rng = nullptr;
};

/// Every other vehicle within `range` metres along the road.
PerceptionSnapshot perceive(const World& world, LongTermId observer, double range, PerceptionNoise noise = {});

/// One truthful signed beacon per vehicle holding a credential in `creds`.
/// Throws std::invalid_argument when `now` is off the beacon grid.
std::vector<Bsm> emit_bsms(const World& world, Millis now, const std::vector<PseudonymCredential>& creds);

}  // namespace mscs
