#include <gtest/gtest.h>

#include <algorithm>

#include "mscs/attacks.hpp"
#include "mscs/risk.hpp"

using namespace mscs;

namespace {
constexpr auto H = Rating::High;
constexpr auto M = Rating::Medium;
constexpr auto L = Rating::Low;
}  // namespace

TEST(Risk, MajorityRule) {
    const Rating all[] = {L, M, H};
    for (auto a : all) {
        for (auto b : all) {
            for (auto c : all) {
                const Rating r = overall_rating(a, b, c);
                if (a == b || a == c) {
                    EXPECT_EQ(r, a);
                } else if (b == c) {
                    EXPECT_EQ(r, b);
                } else {
                    EXPECT_EQ(r, M) << "three different ratings";
                }
                EXPECT_EQ(overall_rating(c, a, b), r) << "argument order does not matter";
            }
        }
    }
}

TEST(Risk, CatalogAudit) {
    auto result = audit_catalog(risk_rows(catalog()));
    EXPECT_EQ(result.distribution.at(H), 8u);
    EXPECT_EQ(result.distribution.at(M), 1u);
    EXPECT_EQ(result.distribution.at(L), 7u);
    EXPECT_EQ(result.discrepancies, std::vector<std::string>{"A11"});
    std::size_t agree = 0;
    for (const auto& row : result.rows) agree += row.assessment.overall() == row.assessment.paper_label;
    EXPECT_EQ(agree, 15u);
}

TEST(Risk, RowOrderDoesNotMatter) {
    auto rows = risk_rows(catalog());
    auto expected = audit(rows);
    std::reverse(rows.begin(), rows.end());
    auto got = audit(rows);
    EXPECT_EQ(got.discrepancies, expected.discrepancies);
    EXPECT_EQ(got.distribution, expected.distribution);
    ASSERT_EQ(got.rows.size(), expected.rows.size());
    for (std::size_t i = 0; i < got.rows.size(); ++i) EXPECT_EQ(got.rows[i].id, expected.rows[i].id);
    EXPECT_EQ(got.rows[1].id, "A2") << "numeric id order, not lexicographic";
}

TEST(Risk, CatalogSizeIsChecked) {
    auto rows = risk_rows(catalog());
    rows.pop_back();
    EXPECT_THROW(audit_catalog(rows), CatalogSizeMismatch);
    EXPECT_NO_THROW(audit(rows));
}

TEST(Risk, EmptyAuditHasAllKeys) {
    auto r = audit({});
    EXPECT_EQ(r.distribution.size(), 3u);
    EXPECT_TRUE(r.discrepancies.empty());
}

TEST(Risk, Rendering) {
    auto result = audit_catalog(risk_rows(catalog()));
    auto table = render_report(result, ReportFormat::Table);
    EXPECT_NE(table.find("A11"), std::string::npos);
    EXPECT_NE(table.find("High=8 Medium=1 Low=7"), std::string::npos);
    auto records = render_report(result, ReportFormat::Records);
    EXPECT_NE(records.find("\"discrepancies\""), std::string::npos);
    EXPECT_EQ(parse_report_format("table"), ReportFormat::Table);
    EXPECT_FALSE(parse_report_format("csv"));
    EXPECT_EQ(parse_rating("High"), H);
    EXPECT_FALSE(parse_rating("Severe"));
}
