#include <gtest/gtest.h>

#include <algorithm>

#include "generators.hpp"
#include "mscs/detection.hpp"
#include "oracles.hpp"

using namespace mscs;
using mscs::testing::Gen;

namespace {

const StationId kSelf{1};
const StationId kSrc{2};
const StationId kOther{3};

Bsm beacon(StationId who, Millis t, int lane, double s, double speed = 100, double width = 1.8, double length = 4.5) {
    Bsm b;
    b.source_id = who;
    b.timestamp = t;
    b.lane = lane;
    b.s = s;
    b.speed = speed;
    b.width = width;
    b.length = length;
    b.signature.signer_id = who;
    return b;
}

MessageDigest digest_of(std::uint8_t tag) {
    MessageDigest d;
    d.bytes.fill(tag);
    return d;
}

SubManeuver plain_sub(StationId who, Millis now) {
    SubManeuver sub;
    sub.executant_id = who;
    sub.trr = TargetRoadResource::lane(1, 100, 180);
    sub.start_time = now + 2500;
    sub.end_time = now + 5500;
    sub.min_speed = 80;
    sub.max_speed = 110;
    sub.executant_width = 1.8;
    sub.executant_length = 4.5;
    return sub;
}

Mscm request(StationId src, std::vector<SubManeuver> subs, Millis now, std::uint64_t id = 77) {
    Mscm m;
    m.msg_type = MscmType::Request;
    m.source_id = src;
    m.msg_timestamp = now;
    m.maneuver_id = id;
    m.destination_ids = {src, kSelf};
    std::vector<StationId> execs;
    for (const auto& s : subs) execs.push_back(s.executant_id);
    m.executant_ids = execs;
    m.maneuver = Maneuver{std::move(subs)};
    m.signature.signer_id = src;
    return m;
}

struct Observer {
    ObserverView view;
    DetectorConfig cfg = DetectorConfig::defaults();

    Observer() {
        view.self = kSelf;
        view.bsms[kSrc].push_back({beacon(kSrc, 9900, 0, 90), digest_of(1)});
        view.bsms[kSelf].push_back({beacon(kSelf, 9900, 1, 100), digest_of(2)});
    }

    std::vector<DetectorId> fired(const Mscm& m, Millis now = 10000) const {
        std::vector<DetectorId> ids;
        for (const auto& e : run_detectors(MscmInput{&m, digest_of(9)}, view, cfg, now)) ids.push_back(e.detector);
        return ids;
    }
};

bool has(const std::vector<DetectorId>& ids, DetectorId d) { return std::find(ids.begin(), ids.end(), d) != ids.end(); }

}  // namespace

TEST(Detection, PlainRequestRaisesNothing) {
    Observer o;
    EXPECT_TRUE(o.fired(request(kSrc, {plain_sub(kSrc, 10000)}, 10000)).empty());
}

TEST(Detection, ValueBoundsMapToTheirDetectors) {
    Observer o;
    struct Case {
        DetectorId expect;
        void (*mutate)(SubManeuver&);
    };
    const Case cases[] = {
        {DetectorId::D5, [](SubManeuver& s) { s.max_speed = 250; }},
        {DetectorId::D9, [](SubManeuver& s) { s.min_speed = 2; }},
        {DetectorId::D11, [](SubManeuver& s) { s.executant_width = 4.0; }},
        {DetectorId::D12, [](SubManeuver& s) { s.executant_length = 31; }},
        {DetectorId::D13, [](SubManeuver& s) { s.end_time = s.start_time - 1000; }},
        {DetectorId::D14, [](SubManeuver& s) { s.start_time = 9000; }},
        {DetectorId::D15, [](SubManeuver& s) { s.end_time = s.start_time + 120000; }},
    };
    for (const auto& c : cases) {
        auto sub = plain_sub(kSrc, 10000);
        c.mutate(sub);
        auto ids = o.fired(request(kSrc, {sub}, 10000));
        EXPECT_TRUE(has(ids, c.expect)) << to_string(c.expect);
    }
}

TEST(Detection, SpecialVehiclesMayExceedTheSpeedBound) {
    Observer o;
    CredentialDirectory dir;
    auto cred = derive_credential(LongTermId{2}, 0, 100000, true);
    dir.add(cred);
    o.view.directory = &dir;
    o.view.bsms[cred.station_id].push_back({beacon(cred.station_id, 9900, 0, 90), digest_of(3)});
    auto sub = plain_sub(cred.station_id, 10000);
    sub.max_speed = 200;
    EXPECT_FALSE(has(o.fired(request(cred.station_id, {sub}, 10000)), DetectorId::D5));
}

TEST(Detection, MissingLaneIsFlagged) {
    Observer o;
    auto sub = plain_sub(kSrc, 10000);
    sub.trr = TargetRoadResource::lane(3, 100, 180);  // source in lane 0, three lanes
    EXPECT_TRUE(has(o.fired(request(kSrc, {sub}, 10000)), DetectorId::D6));
}

TEST(Detection, OverlappingSubManeuversAreFlagged) {
    Observer o;
    o.view.bsms[kOther].push_back({beacon(kOther, 9900, 2, 95), digest_of(4)});
    auto a = plain_sub(kSrc, 10000);
    auto b = plain_sub(kOther, 10000);
    b.trr = TargetRoadResource::lane(1, 150, 200);
    EXPECT_TRUE(has(o.fired(request(kSrc, {a, b}, 10000)), DetectorId::D7));
}

TEST(Detection, CrossSessionOverlapNeedsTheExtension) {
    Observer o;
    auto first = request(kSrc, {plain_sub(kSelf, 10000)}, 10000, 100);
    KnownSession ks;
    ks.state = session_from_request(first);
    ks.requester_lane = 0;
    ks.regions = {spacetime::resolve(first.maneuver->sub_maneuvers[0], 0, 3.5)};
    ks.target_lanes = {1};
    o.view.sessions[100] = ks;
    auto second = request(kSrc, {plain_sub(kOther, 10000)}, 10000, 101);
    o.view.bsms[kOther].push_back({beacon(kOther, 9900, 2, 95), digest_of(4)});
    EXPECT_FALSE(has(o.fired(second), DetectorId::D7x));
    o.cfg.enabled.insert(DetectorId::D7x);
    EXPECT_TRUE(has(o.fired(second), DetectorId::D7x));
}

TEST(Detection, ChangedWidthAcrossMessagesIsFlagged) {
    Observer o;
    auto old_req = request(kSrc, {plain_sub(kSrc, 9000)}, 9000, 50);
    o.view.mscms.push_back({old_req, digest_of(5), 9000});
    auto sub = plain_sub(kSrc, 10000);
    sub.executant_width = 2.3;
    auto ids = o.fired(request(kSrc, {sub}, 10000));
    EXPECT_TRUE(has(ids, DetectorId::D10));
    EXPECT_TRUE(has(ids, DetectorId::D16)) << "beacon says 1.8 m";
}

TEST(Detection, GhostExecutantIsFlagged) {
    Observer o;
    PerceptionSnapshot snap;
    snap.observer = LongTermId{1};
    snap.timestamp = 10000;
    snap.observer_s = 100;
    snap.range = 100;
    o.view.perception[10000] = snap;
    auto ghost = plain_sub(StationId{555}, 10000);
    ghost.trr = TargetRoadResource::lane(0, 120, 160);
    auto req = request(kSrc, {plain_sub(kSrc, 10000), ghost}, 10000);
    EXPECT_TRUE(has(o.fired(req), DetectorId::D3));
}

TEST(Detection, GhostBeaconIsFlagged) {
    Observer o;
    PerceptionSnapshot snap;
    snap.observer = LongTermId{1};
    snap.timestamp = 10000;
    snap.observer_s = 100;
    snap.range = 100;
    snap.observed = {{0, 90, 1.8, 4.5}};
    o.view.perception[10000] = snap;
    auto real = beacon(kSrc, 10000, 0, 91);
    auto fake = beacon(StationId{66}, 10000, 2, 120);
    EXPECT_TRUE(run_detectors(BsmInput{&real, digest_of(1)}, o.view, o.cfg, 10000).empty());
    auto ev = run_detectors(BsmInput{&fake, digest_of(2)}, o.view, o.cfg, 10000);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].detector, DetectorId::D3);
    EXPECT_EQ(ev[0].suspect, StationId{66});
}

TEST(Detection, GhostCheckIgnoresClaimsOutOfRange) {
    PerceptionSnapshot snap;
    snap.observer_s = 0;
    snap.range = 50;
    auto out = check_ghost({{StationId{1}, 0, 80}, {StationId{2}, 0, 10}}, snap, 3);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].station, StationId{2});
}

TEST(Detection, UndecodableFramesMapToD1OrD2) {
    Observer o;
    UndecodableInput a{{CodecErrorKind::MissingMandatory, "maneuver"}, kSrc, digest_of(1)};
    UndecodableInput b{{CodecErrorKind::TrrMismatch, "trr"}, kSrc, digest_of(2)};
    EXPECT_EQ(run_detectors(a, o.view, o.cfg, 0).at(0).detector, DetectorId::D1);
    EXPECT_EQ(run_detectors(b, o.view, o.cfg, 0).at(0).detector, DetectorId::D2);
}

TEST(Detection, DisabledDetectorsStayQuiet) {
    Observer o;
    o.cfg.enabled = {DetectorId::D1};
    auto sub = plain_sub(kSrc, 10000);
    sub.max_speed = 300;
    EXPECT_TRUE(o.fired(request(kSrc, {sub}, 10000)).empty());
}

TEST(Detection, DenialRateAgreesWithWindowOracle) {
    Gen gen(31);
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<ResponseRecord> history;
        const auto n = gen.u64(0, 12);
        for (std::uint64_t i = 0; i < n; ++i) {
            ResponseRecord r;
            r.timestamp = gen.u64(0, 12000);
            r.responder = StationId{static_cast<std::uint32_t>(gen.integer(1, 2))};
            r.requester = StationId{static_cast<std::uint32_t>(gen.integer(10, 12))};
            r.maneuver_id = gen.u64(1, 8);
            r.agree = gen.chance(0.3);
            history.push_back(r);
        }
        const Millis now = gen.u64(0, 13000);
        const Millis window = gen.u64(1, 8000);
        const std::size_t threshold = gen.u64(1, 4);
        const auto got = check_denial_rate(history, StationId{1}, now, window, threshold);
        const auto want = mscs::testing::window_denials(history, StationId{1}, now, window, threshold);
        ASSERT_EQ(!got.empty(), want.flagged) << "trial " << trial;
    }
}

TEST(Detection, DenialRateCountsSessionsOnce) {
    std::vector<ResponseRecord> h;
    for (int i = 0; i < 5; ++i) h.push_back({Millis(1000 + i), kSrc, kOther, 9, false, digest_of(1)});
    EXPECT_TRUE(check_denial_rate(h, kSrc, 2000, 5000, 3).empty()) << "retransmitted refusals are one session";
    h.push_back({1500, kSrc, kOther, 10, false, digest_of(2)});
    h.push_back({1600, kSrc, kOther, 11, false, digest_of(3)});
    EXPECT_EQ(check_denial_rate(h, kSrc, 2000, 5000, 3).size(), 3u);
    EXPECT_TRUE(check_denial_rate(h, kSrc, 6500, 5000, 3).empty()) << "window is half-open at its old end";
}

TEST(Detection, NonResponseNeedsTrafficInsideTheWindow) {
    SessionState s;
    s.maneuver_id = 5;
    s.created_at = 1000;
    s.pending = {kOther};
    std::vector<std::pair<Millis, MessageDigest>> heard = {{500, digest_of(1)}, {3500, digest_of(2)}};
    EXPECT_FALSE(check_nonresponse(s, kOther, heard, 2000));
    heard.push_back({2200, digest_of(3)});
    auto hit = check_nonresponse(s, kOther, heard, 2000);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->first, 2200u);
    EXPECT_FALSE(check_nonresponse(s, kSrc, heard, 2000)) << "not pending";
}

TEST(Detection, TrajectoryCorridor) {
    DetectorConfig cfg = DetectorConfig::defaults();
    auto sub = plain_sub(kSrc, 10000);  // [12500, 15500], s 100..180
    EXPECT_FALSE(check_trajectory(sub, 1, beacon(kSrc, 13000, 0, 120), cfg));
    EXPECT_TRUE(check_trajectory(sub, 1, beacon(kSrc, 13000, 0, 300), cfg));
    EXPECT_FALSE(check_trajectory(sub, 1, beacon(kSrc, 16000, 1, 250), cfg));
    EXPECT_TRUE(check_trajectory(sub, 1, beacon(kSrc, 16000, 0, 250), cfg)) << "never left its lane";
    EXPECT_FALSE(check_trajectory(sub, 1, beacon(kSrc, 18000, 0, 250), cfg)) << "after the settle time";
}

TEST(Detection, DimensionTolerance) {
    DetectorConfig cfg = DetectorConfig::defaults();
    auto sub = plain_sub(kSrc, 0);
    EXPECT_FALSE(check_dimensions(sub, beacon(kSrc, 0, 0, 0, 100, 1.95, 4.9), cfg));
    EXPECT_TRUE(check_dimensions(sub, beacon(kSrc, 0, 0, 0, 100, 2.1, 4.5), cfg));
}

TEST(Detection, ScreenOnlyUsesPrefilterDetectors) {
    Observer o;
    auto sub = plain_sub(kSrc, 10000);
    sub.executant_length = 40;  // D12 is not part of the screen
    EXPECT_FALSE(screen_request(request(kSrc, {sub}, 10000), digest_of(1), o.view, o.cfg, 10000));
    sub.max_speed = 300;
    auto hit = screen_request(request(kSrc, {sub}, 10000), digest_of(1), o.view, o.cfg, 10000);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->detector, DetectorId::D5);
}

TEST(Detection, ReportsCarryEveryReferencedMessage) {
    EvidenceStore store;
    store.put(digest_of(1), Bytes{1});
    store.put(digest_of(2), Bytes{2, 2});
    DetectionEvent e1{DetectorId::D4, kSrc, digest_of(1), 7, 100, {}, {digest_of(2)}};
    DetectionEvent e2{DetectorId::D5, kSrc, digest_of(1), 8, 100, {}, {}};
    auto rep = generate_report(kSelf, {e1, e2}, store, 200);
    EXPECT_EQ(rep.suspect, kSrc);
    EXPECT_EQ(rep.included_messages.size(), 2u) << "shared references are included once";

    DetectionEvent other{DetectorId::D5, kOther, digest_of(1), 8, 100, {}, {}};
    EXPECT_THROW(generate_report(kSelf, {e1, other}, store, 200), std::invalid_argument);
    EXPECT_THROW(generate_report(kSelf, {}, store, 200), std::invalid_argument);
    DetectionEvent missing{DetectorId::D5, kSrc, digest_of(9), 8, 100, {}, {}};
    EXPECT_THROW(generate_report(kSelf, {missing}, store, 200), MissingEvidence);
}

TEST(Detection, DetectorNamesParse) {
    for (auto d : all_detectors()) {
        EXPECT_EQ(parse_detector(to_string(d)), d);
        EXPECT_EQ(parse_detector(detector_name(d)), d);
    }
    EXPECT_FALSE(parse_detector("D99"));
    EXPECT_FALSE(DetectorConfig::defaults().on(DetectorId::D7x));
}

TEST(Detection, HostileRequestsNeverThrow) {
    Observer o;
    Gen gen(8);
    for (int i = 0; i < 500; ++i) {
        auto m = gen.message(MscmType::Request);
        EXPECT_NO_THROW((void)o.fired(m, gen.u64(0, kMaxTimestamp)));
    }
}
