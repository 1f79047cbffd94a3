#include "mscs/risk.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>

namespace mscs {

std::string_view to_string(Rating r) {
    switch (r) {
        case Rating::Low: return "Low";
        case Rating::Medium: return "Medium";
        case Rating::High: return "High";
    }
    return "?";
}

std::optional<Rating> parse_rating(std::string_view text) {
    for (auto r : {Rating::Low, Rating::Medium, Rating::High}) {
        if (to_string(r) == text) return r;
    }
    return std::nullopt;
}

Rating overall_rating(Rating a, Rating b, Rating c) {
    if (a == b || a == c) return a;
    if (b == c) return b;
    return Rating::Medium;
}

CatalogSizeMismatch::CatalogSizeMismatch(std::size_t expected, std::size_t actual)
    : std::invalid_argument(fmt::format("catalog has {} entries, expected {}", actual, expected)) {}

AuditResult audit(std::vector<AuditRow> rows) {
    AuditResult result;
    std::sort(rows.begin(), rows.end(), [](const AuditRow& a, const AuditRow& b) {
        // A2 before A10: compare the numeric part when both look like "A<n>".
        auto key = [](const std::string& id) {
            return id.size() > 1 && id[0] == 'A' ? std::make_pair(std::stoi(id.substr(1)), id) : std::make_pair(0, id);
        };
        return key(a.id) < key(b.id);
    });
    result.distribution = {{Rating::High, 0}, {Rating::Medium, 0}, {Rating::Low, 0}};
    for (const auto& row : rows) {
        ++result.distribution[row.assessment.paper_label];
        if (row.assessment.overall() != row.assessment.paper_label) result.discrepancies.push_back(row.id);
    }
    result.rows = std::move(rows);
    return result;
}

AuditResult audit_catalog(std::vector<AuditRow> rows, std::size_t expected) {
    if (rows.size() != expected) throw CatalogSizeMismatch(expected, rows.size());
    return audit(std::move(rows));
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "table") return ReportFormat::Table;
    if (text == "records") return ReportFormat::Records;
    return std::nullopt;
}

std::string render_report(const AuditResult& result, ReportFormat format) {
    if (format == ReportFormat::Records) {
        nlohmann::ordered_json doc;
        doc["rows"] = nlohmann::ordered_json::array();
        for (const auto& row : result.rows) {
            const auto& a = row.assessment;
            doc["rows"].push_back({{"id", row.id},
                                   {"name", row.name},
                                   {"reproducibility", to_string(a.reproducibility)},
                                   {"impact", to_string(a.impact)},
                                   {"stealthiness", to_string(a.stealthiness)},
                                   {"rule_overall", to_string(a.overall())},
                                   {"paper_label", to_string(a.paper_label)},
                                   {"discrepancy", a.overall() != a.paper_label}});
        }
        nlohmann::ordered_json dist;
        for (auto r : {Rating::High, Rating::Medium, Rating::Low}) dist[std::string(to_string(r))] = result.distribution.at(r);
        doc["distribution"] = dist;
        doc["discrepancies"] = result.discrepancies;
        return doc.dump(2) + "\n";
    }

    std::string out = fmt::format("{:<4} {:<26} {:<8} {:<8} {:<8} {:<8} {:<8} {}\n", "id", "name", "repro", "impact",
                                  "stealth", "rule", "label", "flag");
    for (const auto& row : result.rows) {
        const auto& a = row.assessment;
        out += fmt::format("{:<4} {:<26} {:<8} {:<8} {:<8} {:<8} {:<8} {}\n", row.id, row.name,
                           to_string(a.reproducibility), to_string(a.impact), to_string(a.stealthiness),
                           to_string(a.overall()), to_string(a.paper_label),
                           a.overall() != a.paper_label ? "MISMATCH" : "");
    }
    out += fmt::format("distribution: High={} Medium={} Low={}\n", result.distribution.at(Rating::High),
                       result.distribution.at(Rating::Medium), result.distribution.at(Rating::Low));
    if (result.discrepancies.empty()) {
        out += "no discrepancies\n";
    } else {
        out += fmt::format("discrepancies: {}\n", fmt::join(result.discrepancies, ", "));
    }
    return out;
}

}  // namespace mscs
