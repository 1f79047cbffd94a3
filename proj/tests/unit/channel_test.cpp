#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mscs/sim/channel.hpp"

using namespace mscs;
using namespace mscs::sim;

namespace {

VehicleState car(std::uint32_t id, int lane, double s) {
    VehicleState v;
    v.long_term = LongTermId{id};
    v.lane = lane;
    v.s = s;
    return v;
}

// pseudonym = 100 + long-term id
std::optional<LongTermId> owner(StationId id) {
    if (id.value <= 100) return std::nullopt;
    return LongTermId{id.value - 100};
}

}  // namespace

TEST(Channel, BroadcastReachesEveryoneInRangeSorted) {
    World w(MapModel{}, {car(4, 0, 250), car(1, 1, 0), car(3, 2, -50), car(2, 0, 400)});
    auto got = resolve_recipients(Broadcast{}, w, LongTermId{1}, 300, owner);
    EXPECT_EQ(got, (std::vector<LongTermId>{LongTermId{3}, LongTermId{4}}));
}

TEST(Channel, UnicastOnlyReachesItsTarget) {
    World w(MapModel{}, {car(1, 1, 0), car(2, 0, 10), car(3, 0, 500)});
    EXPECT_EQ(resolve_recipients(Unicast{StationId{102}}, w, LongTermId{1}, 300, owner),
              std::vector<LongTermId>{LongTermId{2}});
    EXPECT_TRUE(resolve_recipients(Unicast{StationId{103}}, w, LongTermId{1}, 300, owner).empty()) << "out of range";
    EXPECT_TRUE(resolve_recipients(Unicast{StationId{42}}, w, LongTermId{1}, 300, owner).empty()) << "unknown";
    EXPECT_TRUE(resolve_recipients(Unicast{StationId{101}}, w, LongTermId{1}, 300, owner).empty()) << "self";
}

TEST(Channel, GroupcastBeamAndPower) {
    World w(MapModel{}, {car(1, 1, 0), car(2, 1, 100), car(3, 1, -100), car(4, 1, 250)});
    Groupcast ahead{0.0, std::numbers::pi / 2, 1.0};
    EXPECT_EQ(resolve_recipients(ahead, w, LongTermId{1}, 300, owner),
              (std::vector<LongTermId>{LongTermId{2}, LongTermId{4}}));
    ahead.power = 0.5;
    EXPECT_EQ(resolve_recipients(ahead, w, LongTermId{1}, 300, owner), std::vector<LongTermId>{LongTermId{2}});
    Groupcast behind{std::numbers::pi, std::numbers::pi / 2, 1.0};
    EXPECT_EQ(resolve_recipients(behind, w, LongTermId{1}, 300, owner), std::vector<LongTermId>{LongTermId{3}});
}

TEST(Channel, DropRateIsFair) {
    for (double p : {0.0, 0.05, 0.3, 0.5}) {
        LossStream loss(p, mix_seed(7, 1));
        const int n = 20000;
        int dropped = 0;
        for (int i = 0; i < n; ++i) dropped += loss.drop();
        EXPECT_NEAR(double(dropped) / n, p, 0.02) << "p = " << p;
    }
}

TEST(Channel, CertainLossDropsEverything) {
    LossStream loss(1.0, 3);
    for (int i = 0; i < 1000; ++i) ASSERT_TRUE(loss.drop());
}

TEST(Channel, StreamsAreReproducibleAndIndependent) {
    LossStream a(0.5, mix_seed(1, 2)), b(0.5, mix_seed(1, 2)), c(0.5, mix_seed(1, 3));
    int same = 0, differ = 0;
    for (int i = 0; i < 200; ++i) {
        const bool x = a.drop(), y = b.drop(), z = c.drop();
        same += x == y;
        differ += x != z;
    }
    EXPECT_EQ(same, 200);
    EXPECT_GT(differ, 50);
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}
