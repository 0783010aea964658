#pragma once

#include <atomic>
#include <string>

#include "cabin/collector/config.hpp"
#include "cabin/collector/service.hpp"
#include "cabin/sim/scenario.hpp"

namespace cabin::collector {

struct LocalRun {
    std::string session_id;
    SessionSummary summary;
    sim::SimOutput generated;
    sim::ServeStats served;
};

/// Runs a whole session hermetically: a collector on an in-process bus, pipe
/// and manual clock, fed by the scenario at the given speed. Files land in
/// cfg.storage_dir. Sources in cfg are replaced by in-process ones.
LocalRun run_local(const sim::ScenarioScript& script, CollectorConfig cfg, double speed,
                   const std::atomic<bool>* cancel = nullptr);

} // namespace cabin::collector
