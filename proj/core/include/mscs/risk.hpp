#pragma once

// Threat scoring: three criterion ratings combined by majority, with an
// audit of transcribed labels against the rule.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mscs {

enum class Rating : std::uint8_t { Low = 0, Medium = 1, High = 2 };

std::string_view to_string(Rating r);
std::optional<Rating> parse_rating(std::string_view text);

/// Majority of the three; Medium when all three differ.
Rating overall_rating(Rating reproducibility, Rating impact, Rating stealthiness);

struct RiskAssessment {
    Rating reproducibility = Rating::Low;
    Rating impact = Rating::Low;
    Rating stealthiness = Rating::Low;
    Rating paper_label = Rating::Low;  // transcribed label, may disagree with the rule

    Rating overall() const { return overall_rating(reproducibility, impact, stealthiness); }
};

struct AuditRow {
    std::string id;
    std::string name;
    RiskAssessment assessment;
};

struct AuditResult {
    std::vector<AuditRow> rows;                 // sorted by id
    std::map<Rating, std::size_t> distribution;  // by transcribed label, all three keys present
    std::vector<std::string> discrepancies;      // ids whose rule result differs from the label
};

class CatalogSizeMismatch : public std::invalid_argument {
public:
    CatalogSizeMismatch(std::size_t expected, std::size_t actual);
};

/// Audits any set of rows. Row order does not affect the result.
AuditResult audit(std::vector<AuditRow> rows);

/// As audit(), but insists on the complete catalog.
AuditResult audit_catalog(std::vector<AuditRow> rows, std::size_t expected = 16);

enum class ReportFormat { Table, Records };
std::optional<ReportFormat> parse_report_format(std::string_view text);

std::string render_report(const AuditResult& result, ReportFormat format);

}  // namespace mscs
