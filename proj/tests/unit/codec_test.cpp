#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mscs/codec.hpp"

using namespace mscs;
using mscs::testing::Gen;

namespace {

Mscm sample_request() {
    Mscm m;
    m.msg_type = MscmType::Request;
    m.source_id = StationId{7};
    m.msg_timestamp = 12345;
    m.maneuver_id = (std::uint64_t{7} << 32) | 1;
    m.destination_ids = {StationId{7}, StationId{9}};
    SubManeuver sub;
    sub.executant_id = StationId{7};
    sub.trr = TargetRoadResource::lane(1, 100.0, 180.0);
    sub.start_time = 14000;
    sub.end_time = 17000;
    sub.min_speed = 80;
    sub.max_speed = 120;
    sub.executant_width = 1.8;
    sub.executant_length = 4.5;
    m.maneuver = Maneuver{{sub}};
    m.executant_ids = std::vector<StationId>{StationId{7}};
    m.signature.signer_id = StationId{7};
    return m;
}

}  // namespace

TEST(Codec, RoundTripsEveryMessageType) {
    Gen gen(11);
    for (int i = 0; i < 500; ++i) {
        const auto m = gen.message();
        const auto bytes = encode(m);
        auto back = decode(bytes);
        ASSERT_TRUE(back.ok()) << back.error().describe() << " at case " << i;
        EXPECT_EQ(back.value(), m);
        EXPECT_EQ(encode(back.value()), bytes);
    }
}

TEST(Codec, FrameHeaderCarriesMagicAndLength) {
    const auto bytes = encode(sample_request());
    ASSERT_GT(bytes.size(), 6u);
    EXPECT_EQ(bytes[0], 'M');
    EXPECT_EQ(bytes[1], 'S');
    const std::uint32_t len = bytes[2] | bytes[3] << 8 | bytes[4] << 16 | std::uint32_t(bytes[5]) << 24;
    EXPECT_EQ(len, bytes.size());
}

TEST(Codec, EncodeRejectsMissingAndIllegalFields) {
    auto m = sample_request();
    m.maneuver.reset();
    try {
        encode(m);
        FAIL() << "expected StructuralError";
    } catch (const StructuralError& e) {
        EXPECT_EQ(e.error().kind, CodecErrorKind::MissingMandatory);
        EXPECT_EQ(e.error().field, field::kManeuver);
    }

    auto r = sample_request();
    r.reason_code = ReasonCode::Agree();
    try {
        encode(r);
        FAIL() << "expected StructuralError";
    } catch (const StructuralError& e) {
        EXPECT_EQ(e.error().kind, CodecErrorKind::IllegalField);
        EXPECT_EQ(e.error().field, field::kReasonCode);
    }
}

TEST(Codec, TrrTagMustMatchLocation) {
    auto m = sample_request();
    m.maneuver->sub_maneuvers[0].trr.trr_type = TrrType::GeoRegion;
    auto err = validate(m);
    ASSERT_TRUE(err);
    EXPECT_EQ(err->kind, CodecErrorKind::TrrMismatch);

    auto hostile = encode_hostile(sample_request(), MismatchTrrTag{});
    auto res = decode(hostile);
    ASSERT_FALSE(res.ok());
    EXPECT_EQ(res.error().kind, CodecErrorKind::TrrMismatch);
}

TEST(Codec, OmittedFieldIsReportedByName) {
    for (auto name : {field::kManeuver, field::kDestinationIds, field::kExecutantIds, field::kSourceId}) {
        auto res = decode(encode_hostile(sample_request(), OmitField{std::string(name)}));
        ASSERT_FALSE(res.ok()) << name;
        EXPECT_EQ(res.error().kind, CodecErrorKind::MissingMandatory) << name;
        EXPECT_EQ(res.error().field, name);
    }
}

TEST(Codec, MutationThatCannotApplyThrows) {
    Mscm resp = Gen(3).message(MscmType::Response);
    EXPECT_THROW(hostile_payload(resp, MismatchTrrTag{}), UnsupportedMutation);
}

TEST(Codec, TruncationAtEveryLengthFailsCleanly) {
    const auto bytes = encode(sample_request());
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        auto res = decode(ByteView(bytes.data(), n));
        EXPECT_FALSE(res.ok()) << "prefix " << n;
    }
}

TEST(Codec, SubManeuverCapIsEnforced) {
    auto m = sample_request();
    auto sub = m.maneuver->sub_maneuvers[0];
    m.maneuver->sub_maneuvers.assign(kMaxSubManeuvers, sub);
    EXPECT_TRUE(decode(encode(m)).ok());
    m.maneuver->sub_maneuvers.push_back(sub);
    auto err = validate(m);
    ASSERT_TRUE(err);
    EXPECT_EQ(err->kind, CodecErrorKind::BadLength);
}

TEST(Codec, PolygonRulesAreEnforced) {
    auto m = sample_request();
    auto& sub = m.maneuver->sub_maneuvers[0];
    sub.trr = TargetRoadResource::region({{0, 0}, {10, 0}, {0, 10}, {10, 10}});  // bow tie
    ASSERT_TRUE(validate(m));
    EXPECT_EQ(validate(m)->kind, CodecErrorKind::BadValue);

    std::vector<Point> many;
    for (int i = 0; i < 17; ++i) many.push_back({std::cos(i * 0.3), std::sin(i * 0.3)});
    sub.trr = TargetRoadResource::region(many);
    ASSERT_TRUE(validate(m));
    EXPECT_EQ(validate(m)->kind, CodecErrorKind::BadLength);
}

TEST(Codec, TimestampIsFortyEightBits) {
    auto m = sample_request();
    m.msg_timestamp = kMaxTimestamp;
    EXPECT_TRUE(decode(encode(m)).ok());
    m.msg_timestamp = kMaxTimestamp + 1;
    EXPECT_THROW(encode(m), StructuralError);
}

TEST(Codec, ExecutionStatusMustMatchType) {
    Mscm m = Gen(5).message(MscmType::Cancel);
    m.execution_status = ExecutionStatus::Completed;
    ASSERT_TRUE(validate(m));
    EXPECT_EQ(validate(m)->field, field::kExecutionStatus);
}

TEST(Codec, RandomBytesNeverThrow) {
    Gen gen(99);
    for (int i = 0; i < 5000; ++i) {
        auto bytes = gen.bytes(256);
        if (bytes.size() >= 2 && gen.chance(0.5)) {
            bytes[0] = 'M';
            bytes[1] = 'S';
        }
        EXPECT_NO_THROW((void)decode(bytes));
    }
}

TEST(Codec, BitFlipsNeverThrow) {
    Gen gen(7);
    for (int i = 0; i < 300; ++i) {
        auto bytes = encode(gen.message());
        const auto at = gen.u64(0, bytes.size() - 1);
        bytes[at] ^= static_cast<std::uint8_t>(1u << gen.integer(0, 7));
        EXPECT_NO_THROW((void)decode(bytes));
    }
}

TEST(Codec, SignatureIsLastAndPeekable) {
    auto m = sample_request();
    m.signature.tag.fill(0xab);
    const auto bytes = encode(m);
    auto view = peek_signed(bytes);
    ASSERT_TRUE(view);
    EXPECT_EQ(view->signature, m.signature);
    const auto payload = signing_payload(m);
    EXPECT_EQ(Bytes(view->body.begin(), view->body.end()), payload);

    auto hostile = encode_hostile(m, OmitField{std::string(field::kManeuver)});
    auto hv = peek_signed(hostile);
    ASSERT_TRUE(hv);
    EXPECT_EQ(hv->signature.signer_id, m.signature.signer_id);
}

TEST(Codec, DisagreeCodesSurviveRoundTrip) {
    Mscm m = Gen(2).message(MscmType::Response);
    for (int code : {0, 1, 255}) {
        m.reason_code = ReasonCode::Disagree(static_cast<std::uint8_t>(code));
        auto back = decode(encode(m));
        ASSERT_TRUE(back.ok());
        EXPECT_FALSE(back.value().reason_code->agree);
        EXPECT_EQ(back.value().reason_code->code, code);
    }
}

TEST(Codec, HexHelpers) {
    Bytes out;
    EXPECT_TRUE(from_hex("00ff10", out));
    EXPECT_EQ(out, (Bytes{0x00, 0xff, 0x10}));
    EXPECT_EQ(to_hex(out), "00ff10");
    EXPECT_FALSE(from_hex("abc", out));
    EXPECT_FALSE(from_hex("zz", out));
}
