#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mscs/protocol.hpp"
#include "mscs/world.hpp"

namespace mscs::sim {

/// Maps a pseudonym to the vehicle holding it; nullopt for unknown ids.
using OwnerLookup = std::function<std::optional<LongTermId>(StationId)>;

/// Stations that physically receive a frame, sorted by long-term id.
/// Distances are Euclidean in road coordinates; groupcast bearings are
/// measured from the direction of travel towards the left road edge.
std::vector<LongTermId> resolve_recipients(const CastMode& mode, const World& world, LongTermId sender, double range,
                                           const OwnerLookup& owner_of);

/// Seeded per-recipient loss decisions. Draws happen in call order, so the
/// caller fixes the order (senders sorted, recipients sorted).
class LossStream {
public:
    LossStream(double loss_prob, std::uint64_t seed);
    bool drop();
    double loss_prob() const { return p_; }

private:
    double p_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> u_{0.0, 1.0};
};

/// splitmix64 finaliser; used to derive independent streams from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mscs::sim
