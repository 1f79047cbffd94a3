#include "mscs/world.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace mscs {

bool lane_exists(const MapModel& map, int observer_lane, int lane_offset) {
    const int lane = observer_lane + lane_offset;
    return lane >= 0 && lane < map.lane_count;
}

double VehicleState::lateral(double lane_width, Millis now) const {
    auto centre = [&](int l) { return (l + 0.5) * lane_width; };
    if (!lane_change || now <= lane_change->start) return centre(lane);
    const double f = std::min(1.0, double(now - lane_change->start) / double(kLaneChangeDuration));
    return centre(lane_change->from_lane) + f * (centre(lane_change->to_lane) - centre(lane_change->from_lane));
}

namespace {

constexpr std::uint8_t kBsmMagic0 = 'B';
constexpr std::uint8_t kBsmMagic1 = 'S';
constexpr std::size_t kBsmPayloadSize = 2 + 4 + 8 + 1 + 4 * 8;
constexpr std::size_t kBsmFrameSize = kBsmPayloadSize + 4 + 16;

void put_u64(Bytes& out, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v), 8); }

std::uint64_t get_u64(ByteView in, std::size_t at, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{in[at + i]} << (8 * i);
    return v;
}
double get_f64(ByteView in, std::size_t at) { return std::bit_cast<double>(get_u64(in, at, 8)); }

}  // namespace

Bytes bsm_signing_payload(const Bsm& bsm) {
    Bytes out;
    out.reserve(kBsmFrameSize);
    out.push_back(kBsmMagic0);
    out.push_back(kBsmMagic1);
    put_u64(out, bsm.source_id.value, 4);
    put_u64(out, bsm.timestamp, 8);
    out.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(bsm.lane)));
    put_f64(out, bsm.s);
    put_f64(out, bsm.speed);
    put_f64(out, bsm.width);
    put_f64(out, bsm.length);
    return out;
}

Bytes encode_bsm(const Bsm& bsm) {
    Bytes out = bsm_signing_payload(bsm);
    put_u64(out, bsm.signature.signer_id.value, 4);
    out.insert(out.end(), bsm.signature.tag.begin(), bsm.signature.tag.end());
    return out;
}

bool looks_like_bsm(ByteView bytes) {
    return bytes.size() >= 2 && bytes[0] == kBsmMagic0 && bytes[1] == kBsmMagic1;
}

std::optional<Bsm> decode_bsm(ByteView bytes) {
    if (bytes.size() != kBsmFrameSize || !looks_like_bsm(bytes)) return std::nullopt;
    Bsm b;
    std::size_t at = 2;
    b.source_id = StationId{static_cast<std::uint32_t>(get_u64(bytes, at, 4))};
    at += 4;
    b.timestamp = get_u64(bytes, at, 8);
    at += 8;
    b.lane = static_cast<std::int8_t>(bytes[at]);
    at += 1;
    b.s = get_f64(bytes, at);
    b.speed = get_f64(bytes, at + 8);
    b.width = get_f64(bytes, at + 16);
    b.length = get_f64(bytes, at + 24);
    at += 32;
    b.signature.signer_id = StationId{static_cast<std::uint32_t>(get_u64(bytes, at, 4))};
    at += 4;
    std::copy_n(bytes.begin() + at, 16, b.signature.tag.begin());
    for (double v : {b.s, b.speed, b.width, b.length}) {
        if (!std::isfinite(v)) return std::nullopt;
    }
    return b;
}

World::World(MapModel map, std::vector<VehicleState> vehicles, Millis now)
    : map_(map), vehicles_(std::move(vehicles)), now_(now) {
    std::sort(vehicles_.begin(), vehicles_.end(),
              [](const VehicleState& a, const VehicleState& b) { return a.long_term < b.long_term; });
    for (std::size_t i = 1; i < vehicles_.size(); ++i) {
        if (vehicles_[i].long_term == vehicles_[i - 1].long_term) {
            throw std::invalid_argument("duplicate vehicle id");
        }
    }
}

const VehicleState* World::find(LongTermId id) const {
    auto it = std::lower_bound(vehicles_.begin(), vehicles_.end(), id,
                               [](const VehicleState& v, LongTermId k) { return v.long_term < k; });
    return it != vehicles_.end() && it->long_term == id ? &*it : nullptr;
}

VehicleState* World::find(LongTermId id) {
    return const_cast<VehicleState*>(std::as_const(*this).find(id));
}

bool World::start_lane_change(LongTermId id, int to_lane, Millis start) {
    auto* v = find(id);
    if (!v || v->lane_change || to_lane == v->lane || to_lane < 0 || to_lane >= map_.lane_count) return false;
    v->lane_change = LaneChange{v->lane, to_lane, start};
    return true;
}

void World::step(Millis dt) {
    if (dt == 0) throw std::invalid_argument("step_kinematics: dt must be positive");
    now_ += dt;
    for (auto& v : vehicles_) {
        v.s += kmh_to_mps(v.speed) * double(dt) / 1000.0;
        if (!v.lane_change || now_ < v.lane_change->start) continue;
        const Millis elapsed = now_ - v.lane_change->start;
        // The occupied lane flips once the centre crosses the lane boundary.
        if (elapsed * 2 >= kLaneChangeDuration) v.lane = v.lane_change->to_lane;
        if (elapsed >= kLaneChangeDuration) v.lane_change.reset();
    }
}

SubManeuver lane_change_sub(const VehicleState& v, StationId executant, int lane_offset, Millis now, Millis lead) {
    SubManeuver sub;
    sub.executant_id = executant;
    sub.start_time = now + lead;
    sub.end_time = sub.start_time + kLaneChangeDuration;
    const double mps = kmh_to_mps(v.speed);
    const double start_s = v.s + mps * double(lead) / 1000.0;
    const double end_s = std::max(v.s + mps * double(lead + kLaneChangeDuration) / 1000.0, start_s + v.length);
    sub.trr = TargetRoadResource::lane(static_cast<std::int8_t>(lane_offset), start_s, end_s);
    sub.min_speed = std::max(0.0, v.speed - 20.0);
    sub.max_speed = v.speed + 10.0;
    sub.executant_width = v.width;
    sub.executant_length = v.length;
    return sub;
}

void step_kinematics(World& world, Millis dt) { world.step(dt); }

PerceptionSnapshot perceive(const World& world, LongTermId observer, double range, PerceptionNoise noise) {
    const auto* self = world.find(observer);
    if (!self) throw std::invalid_argument("perceive: unknown observer");
    PerceptionSnapshot snap;
    snap.observer = observer;
    snap.timestamp = world.now();
    snap.observer_lane = self->lane;
    snap.observer_s = self->s;
    snap.range = range;
    std::normal_distribution<double> gauss(0.0, noise.position_sigma > 0 ? noise.position_sigma : 1.0);
    for (const auto& v : world.vehicles()) {
        if (v.long_term == observer || std::abs(v.s - self->s) > range) continue;
        double s = v.s;
        if (noise.position_sigma > 0 && noise.rng) s += gauss(*noise.rng);
        snap.observed.push_back({v.lane, s, v.width, v.length});
    }
    std::sort(snap.observed.begin(), snap.observed.end(),
              [](const ObservedVehicle& a, const ObservedVehicle& b) { return a.s < b.s; });
    return snap;
}

std::vector<Bsm> emit_bsms(const World& world, Millis now, const std::vector<PseudonymCredential>& creds) {
    if (now % kBeaconInterval != 0) throw std::invalid_argument("emit_bsms: off the beacon grid");
    std::vector<Bsm> out;
    for (const auto& v : world.vehicles()) {
        auto cred = std::find_if(creds.begin(), creds.end(),
                                 [&](const PseudonymCredential& c) { return c.owner == v.long_term; });
        if (cred == creds.end()) continue;
        Bsm b{cred->station_id, now, v.lane, v.s, v.speed, v.width, v.length, {}};
        b.signature = sign(bsm_signing_payload(b), *cred, now);
        out.push_back(b);
    }
    return out;
}

}  // namespace mscs
