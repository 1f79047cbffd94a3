#pragma once

#include "mscs/sim/config.hpp"
#include "mscs/sim/event_log.hpp"
#include "mscs/sim/metrics.hpp"

namespace mscs::sim {

struct RunResult {
    EventLog log;
    AttributionLog attribution;  // hidden ground truth, never visible to stations
    RunMetrics metrics;
};

/// Runs the scenario to completion. Validates first and throws ConfigError.
/// Deterministic in (config, seed): equal inputs give byte-identical logs.
RunResult run(const ScenarioConfig& config);

}  // namespace mscs::sim
