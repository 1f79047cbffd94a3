#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "mscs/sim/config.hpp"
#include "mscs/sim/harness.hpp"
#include "mscs/sim/metrics.hpp"

using namespace mscs;
using namespace mscs::sim;

namespace {

ScenarioConfig short_run(std::uint64_t seed, std::vector<AttackSpec> attacks = {}) {
    auto cfg = reference_scenario(seed, std::move(attacks));
    cfg.duration_ms = 40000;
    return cfg;
}

std::size_t count(const EventLog& log, RecordKind kind) {
    return std::count_if(log.records().begin(), log.records().end(), [&](const LogRecord& r) { return r.kind() == kind; });
}

}  // namespace

TEST(Harness, SameSeedSameLog) {
    auto a = run(short_run(5));
    auto b = run(short_run(5));
    EXPECT_EQ(a.log.digest(), b.log.digest());
    EXPECT_EQ(a.metrics, b.metrics);
    auto c = run(short_run(6));
    EXPECT_NE(a.log.digest(), c.log.digest());
}

TEST(Harness, DeclarationOrderDoesNotMatter) {
    auto cfg = short_run(3, {AttackSpec{AttackId::A4, LongTermId{6}, {}}});
    auto shuffled = cfg;
    std::reverse(shuffled.vehicles.begin(), shuffled.vehicles.end());
    std::rotate(shuffled.vehicles.begin(), shuffled.vehicles.begin() + 2, shuffled.vehicles.end());
    EXPECT_EQ(run(cfg).log.digest(), run(shuffled).log.digest());
}

TEST(Harness, HonestTrafficRaisesNoDetections) {
    auto r = run(short_run(2));
    EXPECT_EQ(count(r.log, RecordKind::Detection), 0u);
    EXPECT_EQ(r.metrics.false_positives, 0u);
    EXPECT_GT(r.metrics.transitions[Phase::Active], 0u) << "honest vehicles should negotiate lane changes";
    EXPECT_GT(r.metrics.transitions[Phase::Completed], 0u);
}

TEST(Harness, TotalLossDeliversNothing) {
    auto cfg = short_run(4);
    cfg.channel.loss_prob = 1.0;
    auto r = run(cfg);
    EXPECT_EQ(count(r.log, RecordKind::MsgDelivered), 0u);
    EXPECT_GT(count(r.log, RecordKind::MsgDropped), 0u);
    EXPECT_EQ(count(r.log, RecordKind::Detection), 0u);
}

TEST(Harness, ChannelDropRateMatchesConfig) {
    for (double p : {0.05, 0.2}) {
        auto cfg = short_run(8);
        cfg.channel.loss_prob = p;
        auto r = run(cfg);
        const auto& ch = r.metrics.channel;
        ASSERT_GE(ch.delivered + ch.dropped, 10000u);
        EXPECT_NEAR(ch.drop_rate(), p, 0.02);
    }
}

TEST(Harness, ReplayedLogGivesTheSameMetrics) {
    auto r = run(short_run(9, {AttackSpec{AttackId::A9, LongTermId{6}, {}}}));
    auto log = EventLog::parse(r.log.to_jsonl());
    std::stringstream buf;
    r.attribution.write(buf);
    auto attribution = AttributionLog::parse(buf);
    EXPECT_EQ(compute_metrics(log, attribution), r.metrics);
}

TEST(Harness, AttributionMustMatchTheLog) {
    auto r = run(short_run(1, {AttackSpec{AttackId::A5, LongTermId{6}, {}}}));
    AttributionLog forged = r.attribution;
    MessageDigest bogus;
    bogus.bytes.fill(0xee);
    forged.append({1, 100, "transmit", AttackId::A5, 6, bogus, 0, "forged"});
    EXPECT_THROW(compute_metrics(r.log, forged), LogMismatch);
}

TEST(Harness, SpeedAttackIsFlaggedAndReported) {
    auto r = run(short_run(1, {AttackSpec{AttackId::A5, LongTermId{6}, {}}}));
    ASSERT_EQ(r.metrics.attacks.size(), 1u);
    const auto& a = r.metrics.attacks[0];
    EXPECT_TRUE(a.flagged());
    ASSERT_TRUE(a.latency(DetectorId::D5));
    EXPECT_LE(*a.latency(DetectorId::D5), 5000u);
    EXPECT_EQ(r.metrics.false_positives, 0u);
    EXPECT_GT(r.metrics.reports, 0u);
}

TEST(Harness, KinematicsTraceIsOptional) {
    auto cfg = short_run(1);
    cfg.duration_ms = 2000;
    EXPECT_EQ(count(run(cfg).log, RecordKind::Kinematics), 0u);
    cfg.trace_kinematics = true;
    EXPECT_EQ(count(run(cfg).log, RecordKind::Kinematics), 6u * 21u) << "ticks at 0, 100, ..., 2000";
}

TEST(Harness, InvalidConfigIsRefused) {
    auto cfg = short_run(1);
    cfg.vehicles[0].lane = 9;
    EXPECT_THROW(run(cfg), ConfigError);
}

TEST(Harness, MetricsDocumentStatesTheRecallConvention) {
    auto r = run(short_run(1, {AttackSpec{AttackId::A13, LongTermId{6}, {}}}));
    const auto doc = metrics_json(r.metrics);
    EXPECT_NE(doc.find("recall_convention"), std::string::npos);
    EXPECT_NE(metrics_summary(r.metrics).find("A13"), std::string::npos);
}
