#include "mscs/sim/channel.hpp"

#include <cmath>
#include <numbers>

namespace mscs::sim {

namespace {

double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2 * std::numbers::pi);
    if (a < 0) a += 2 * std::numbers::pi;
    return a - std::numbers::pi;
}

}  // namespace

std::vector<LongTermId> resolve_recipients(const CastMode& mode, const World& world, LongTermId sender, double range,
                                           const OwnerLookup& owner_of) {
    std::vector<LongTermId> out;
    const auto* src = world.find(sender);
    if (!src) return out;
    const double w = world.map().lane_width;
    const Millis now = world.now();
    const double sy = src->lateral(w, now);
    auto distance = [&](const VehicleState& v) { return std::hypot(v.s - src->s, v.lateral(w, now) - sy); };

    if (const auto* uni = std::get_if<Unicast>(&mode)) {
        auto owner = owner_of(uni->target);
        if (!owner || *owner == sender) return out;
        const auto* dst = world.find(*owner);
        if (dst && distance(*dst) <= range) out.push_back(*owner);
        return out;
    }
    const auto* group = std::get_if<Groupcast>(&mode);
    const double reach = group ? range * group->power : range;
    for (const auto& v : world.vehicles()) {
        if (v.long_term == sender || distance(v) > reach) continue;
        if (group) {
            const double bearing = std::atan2(v.lateral(w, now) - sy, v.s - src->s);
            if (std::abs(wrap_angle(bearing - group->beam_center)) > group->beam_width / 2) continue;
        }
        out.push_back(v.long_term);
    }
    return out;
}

LossStream::LossStream(double loss_prob, std::uint64_t seed) : p_(loss_prob), rng_(seed) {}

bool LossStream::drop() {
    // Always draw, so the stream position does not depend on p.
    const double u = u_(rng_);
    return u < p_;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace mscs::sim
