#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mscs/attacks.hpp"
#include "mscs/codec.hpp"
#include "mscs/risk.hpp"
#include "mscs/sim/config.hpp"
#include "mscs/sim/harness.hpp"
#include "mscs/sim/metrics.hpp"

namespace fs = std::filesystem;
using namespace mscs;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kConfigError = 2;

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "mscs_out";
    std::string detectors;
    bool trace_kinematics = false;
};

std::set<DetectorId> parse_detector_list(const std::string& text) {
    std::set<DetectorId> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        if (item == "all") {
            out.insert(all_detectors().begin(), all_detectors().end());
            continue;
        }
        auto d = parse_detector(item);
        if (!d) throw sim::ConfigError("detectors", fmt::format("unknown detector '{}'", item));
        out.insert(*d);
    }
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    f << text;
}

int cmd_run(const RunArgs& args) {
    sim::ScenarioConfig cfg;
    try {
        cfg = sim::load_config(args.config);
        // flag beats environment beats file
        if (auto env = sim::seed_from_env()) cfg.seed = *env;
        if (args.seed) cfg.seed = *args.seed;
        if (!args.detectors.empty()) cfg.detectors.enabled = parse_detector_list(args.detectors);
        if (args.trace_kinematics) cfg.trace_kinematics = true;
        sim::validate(cfg);
    } catch (const std::exception& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    }

    auto result = sim::run(cfg);

    const fs::path out(args.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        fmt::print(stderr, "cannot create {}: {}\n", out.string(), ec.message());
        return kConfigError;
    }
    {
        std::ofstream f(out / "events.jsonl", std::ios::binary);
        result.log.write(f);
    }
    {
        std::ofstream f(out / "attribution.jsonl", std::ios::binary);
        result.attribution.write(f);
    }
    write_file(out / "metrics.json", sim::metrics_json(result.metrics));
    const auto summary = fmt::format("seed {}  records {}  log digest {}\n{}", cfg.seed, result.log.size(),
                                     result.log.digest().hex(), sim::metrics_summary(result.metrics));
    write_file(out / "summary.txt", summary);
    fmt::print("{}", summary);
    return kOk;
}

int cmd_attacks_list(const std::string& format) {
    if (format == "records") {
        nlohmann::ordered_json doc = nlohmann::ordered_json::array();
        for (const auto& e : catalog()) {
            std::vector<std::string> dets;
            for (auto d : expected_detectors(e.id)) dets.emplace_back(to_string(d));
            doc.push_back({{"id", to_string(e.id)},
                           {"name", attack_name(e.id)},
                           {"description", e.description},
                           {"defense", e.defense},
                           {"detectors", dets},
                           {"reproducibility", to_string(e.risk.reproducibility)},
                           {"impact", to_string(e.risk.impact)},
                           {"stealthiness", to_string(e.risk.stealthiness)},
                           {"label", to_string(e.risk.paper_label)}});
        }
        fmt::print("{}\n", doc.dump(2));
        return kOk;
    }
    fmt::print("{:<4} {:<26} {:<10} {}\n", "id", "name", "detectors", "description");
    for (const auto& e : catalog()) {
        std::vector<std::string_view> dets;
        for (auto d : expected_detectors(e.id)) dets.push_back(to_string(d));
        fmt::print("{:<4} {:<26} {:<10} {}\n", to_string(e.id), attack_name(e.id), fmt::join(dets, ","),
                   e.description);
    }
    return kOk;
}

int cmd_risk_report(const std::string& format) {
    auto fmt_kind = parse_report_format(format);
    if (!fmt_kind) {
        fmt::print(stderr, "unknown format '{}', expected table or records\n", format);
        return kConfigError;
    }
    fmt::print("{}", render_report(audit_catalog(risk_rows(catalog())), *fmt_kind));
    return kOk;
}

// Hex when the whole file is hex digits and whitespace, raw bytes otherwise.
Bytes read_message(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot read {}", path));
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    std::string digits;
    bool hex = !raw.empty();
    for (unsigned char c : raw) {
        if (std::isspace(c)) continue;
        if (!std::isxdigit(c)) {
            hex = false;
            break;
        }
        digits.push_back(static_cast<char>(c));
    }
    Bytes out;
    if (hex && from_hex(digits, out)) return out;
    return Bytes(raw.begin(), raw.end());
}

std::string ids(const std::vector<StationId>& v) {
    std::vector<std::uint32_t> raw;
    for (auto id : v) raw.push_back(id.value);
    return fmt::format("[{}]", fmt::join(raw, ", "));
}

void print_message(const Mscm& m) {
    fmt::print("msg_type        {}\n", to_string(m.msg_type));
    fmt::print("source_id       {}\n", m.source_id.value);
    fmt::print("msg_timestamp   {}\n", m.msg_timestamp);
    fmt::print("maneuver_id     {}\n", m.maneuver_id);
    fmt::print("destination_ids {}\n", ids(m.destination_ids));
    if (m.executant_ids) fmt::print("executant_ids   {}\n", ids(*m.executant_ids));
    if (m.reason_code) {
        fmt::print("reason_code     {}\n", m.reason_code->agree ? std::string("Agree")
                                                                 : fmt::format("Disagree({})", m.reason_code->code));
    }
    if (m.execution_status) {
        fmt::print("execution_status {}\n", *m.execution_status == ExecutionStatus::Completed ? "Completed" : "Cancelled");
    }
    if (m.maneuver) {
        fmt::print("maneuver        {} sub-maneuver(s)\n", m.maneuver->sub_maneuvers.size());
        for (const auto& sub : m.maneuver->sub_maneuvers) {
            std::string where;
            if (const auto* seg = std::get_if<LaneSegment>(&sub.trr.location)) {
                where = fmt::format("lane {:+d} s [{:.1f}, {:.1f}]", seg->lane_offset, seg->start_s, seg->end_s);
            } else {
                where = fmt::format("region {} vertices", std::get<GeoRegion>(sub.trr.location).polygon.size());
            }
            fmt::print("  executant {} {} t [{}, {}] v [{:.1f}, {:.1f}] km/h dims {:.2f} x {:.2f} m\n",
                       sub.executant_id.value, where, sub.start_time, sub.end_time, sub.min_speed, sub.max_speed,
                       sub.executant_width, sub.executant_length);
        }
    }
    fmt::print("signer          {}\n", m.signature.signer_id.value);
}

int cmd_validate(const std::string& path) {
    Bytes bytes;
    try {
        bytes = read_message(path);
    } catch (const std::exception& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kConfigError;
    }
    auto result = decode(bytes);
    if (!result) {
        fmt::print("invalid: {}\n", result.error().describe());
        return kInvalid;
    }
    print_message(result.value());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Maneuver coordination security simulator"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a scenario and write the event log and metrics");
    run->add_option("--config", run_args.config, "Scenario JSON file")->required();
    run->add_option("--seed", run_args.seed, "Override the scenario seed");
    run->add_option("--out", run_args.out, "Output directory")->capture_default_str();
    run->add_option("--detectors", run_args.detectors, "Comma-separated detector ids or names, or 'all'");
    run->add_flag("--trace-kinematics", run_args.trace_kinematics, "Log vehicle states every tick");

    std::string attacks_format = "table";
    auto* attacks = app.add_subcommand("attacks", "Attack catalog");
    attacks->require_subcommand(1);
    auto* attacks_list = attacks->add_subcommand("list", "Print the attack catalog");
    attacks_list->add_option("--format", attacks_format, "table or records")
        ->check(CLI::IsMember({"table", "records"}))
        ->capture_default_str();

    std::string risk_format = "table";
    auto* risk = app.add_subcommand("risk", "Threat ratings");
    risk->require_subcommand(1);
    auto* risk_report = risk->add_subcommand("report", "Audit the rating rule against the catalog labels");
    risk_report->add_option("--format", risk_format, "table or records")->capture_default_str();

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Decode a hex or binary message file");
    validate->add_option("file", validate_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*run) return cmd_run(run_args);
    if (*attacks_list) return cmd_attacks_list(attacks_format);
    if (*risk_report) return cmd_risk_report(risk_format);
    if (*validate) return cmd_validate(validate_path);
    return kConfigError;
}
