#include <gtest/gtest.h>

#include "mscs/world.hpp"

using namespace mscs;

namespace {

VehicleState car(std::uint32_t id, int lane, double s, double speed = 72.0) {
    VehicleState v;
    v.long_term = LongTermId{id};
    v.lane = lane;
    v.s = s;
    v.speed = speed;
    return v;
}

}  // namespace

TEST(World, LaneExistence) {
    MapModel map;
    EXPECT_TRUE(lane_exists(map, 0, 2));
    EXPECT_FALSE(lane_exists(map, 0, 3));
    EXPECT_FALSE(lane_exists(map, 1, -2));
    EXPECT_TRUE(lane_exists(map, 2, -2));
}

TEST(World, StepAdvancesAlongTheRoad) {
    World w(MapModel{}, {car(1, 0, 0, 72.0)});
    step_kinematics(w, 1000);
    EXPECT_DOUBLE_EQ(w.find(LongTermId{1})->s, 20.0);
    EXPECT_EQ(w.now(), 1000u);
    EXPECT_THROW(step_kinematics(w, 0), std::invalid_argument);
}

TEST(World, LaneChangeFlipsAtHalfwayAndEnds) {
    World w(MapModel{}, {car(1, 0, 0)});
    ASSERT_TRUE(w.start_lane_change(LongTermId{1}, 1, 1000));
    EXPECT_FALSE(w.start_lane_change(LongTermId{1}, 2, 1000)) << "one change at a time";
    const auto* v = w.find(LongTermId{1});
    for (int i = 0; i < 10; ++i) step_kinematics(w, 100);
    EXPECT_EQ(v->lane, 0);
    EXPECT_DOUBLE_EQ(v->lateral(3.5, w.now()), 1.75);
    for (int i = 0; i < 15; ++i) step_kinematics(w, 100);
    EXPECT_EQ(v->lane, 1);
    EXPECT_NEAR(v->lateral(3.5, w.now()), 3.5, 1e-9);
    for (int i = 0; i < 15; ++i) step_kinematics(w, 100);
    EXPECT_FALSE(v->lane_change);
    EXPECT_DOUBLE_EQ(v->lateral(3.5, w.now()), 5.25);
}

TEST(World, LaneChangeOffTheRoadIsRefused) {
    World w(MapModel{}, {car(1, 2, 0)});
    EXPECT_FALSE(w.start_lane_change(LongTermId{1}, 3, 0));
    EXPECT_FALSE(w.start_lane_change(LongTermId{1}, 2, 0));
    EXPECT_FALSE(w.start_lane_change(LongTermId{9}, 1, 0));
}

TEST(World, DuplicateIdsAreRejected) {
    EXPECT_THROW(World(MapModel{}, {car(1, 0, 0), car(1, 1, 5)}), std::invalid_argument);
}

TEST(World, PerceptionRespectsRangeAndSortsByPosition) {
    World w(MapModel{}, {car(3, 1, 80), car(1, 0, 0), car(2, 2, -30), car(4, 0, 150)});
    auto snap = perceive(w, LongTermId{1}, 100);
    ASSERT_EQ(snap.observed.size(), 2u);
    EXPECT_DOUBLE_EQ(snap.observed[0].s, -30);
    EXPECT_DOUBLE_EQ(snap.observed[1].s, 80);
    EXPECT_EQ(snap.observed[1].lane, 1);
}

TEST(World, PerceptionNoiseIsSeeded) {
    World w(MapModel{}, {car(1, 0, 0), car(2, 1, 20)});
    std::mt19937_64 a(5), b(5);
    auto s1 = perceive(w, LongTermId{1}, 100, {0.5, &a});
    auto s2 = perceive(w, LongTermId{1}, 100, {0.5, &b});
    EXPECT_EQ(s1.observed, s2.observed);
    EXPECT_NE(s1.observed[0].s, 20.0);
}

TEST(World, BeaconsAreSignedAndRoundTrip) {
    World w(MapModel{}, {car(1, 0, 10), car(2, 1, 25)});
    std::vector<PseudonymCredential> creds = {derive_credential(LongTermId{1}, 0, 100000)};
    auto bsms = emit_bsms(w, 500, creds);
    ASSERT_EQ(bsms.size(), 1u) << "vehicles without a credential stay silent";
    const auto bytes = encode_bsm(bsms[0]);
    EXPECT_TRUE(looks_like_bsm(bytes));
    auto back = decode_bsm(bytes);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, bsms[0]);

    CredentialDirectory dir;
    dir.add(creds[0]);
    EXPECT_TRUE(verify(back->signature, bsm_signing_payload(*back), dir, RevocationList{}, 500));
    EXPECT_THROW(emit_bsms(w, 550, creds), std::invalid_argument);
}

TEST(World, BeaconDecoderRejectsWrongSizes) {
    Bytes junk = {'B', 'S', 1, 2, 3};
    EXPECT_FALSE(decode_bsm(junk));
    EXPECT_FALSE(decode_bsm(Bytes{}));
}

TEST(World, LaneChangeSubPredictsCorridor) {
    auto v = car(1, 0, 100, 72.0);
    auto sub = lane_change_sub(v, StationId{5}, 1, 1000);
    EXPECT_EQ(sub.start_time, 3500u);
    EXPECT_EQ(sub.end_time, 6500u);
    const auto& seg = std::get<LaneSegment>(sub.trr.location);
    EXPECT_EQ(seg.lane_offset, 1);
    EXPECT_DOUBLE_EQ(seg.start_s, 150.0);
    EXPECT_DOUBLE_EQ(seg.end_s, 210.0);
    EXPECT_DOUBLE_EQ(sub.max_speed, 82.0);
}
