#include "cabin/collector/simulate.hpp"

#include <filesystem>

#include "cabin/transport/bus.hpp"
#include "cabin/transport/bytes.hpp"
#include "cabin/transport/clock.hpp"

namespace cabin::collector {

LocalRun run_local(const sim::ScenarioScript& script, CollectorConfig cfg, double speed,
                   const std::atomic<bool>* cancel) {
    script.validate();
    std::filesystem::create_directories(cfg.storage_dir);

    const auto hermetic = inproc_config(cfg.storage_dir);
    cfg.sources = hermetic.sources;
    cfg.mqtt.reset();
    cfg.clock = ClockConfig{};

    transport::InProcessBus bus;
    transport::InProcessPipe pipe;
    transport::ManualClock clock(script.start_epoch_ms);
    Collector collector(std::move(cfg), CollectorIo{&clock, &bus, &pipe});

    LocalRun run;
    run.session_id = collector.start_session();
    run.generated = sim::generate(script, run.session_id);

    sim::ServeTargets targets;
    targets.bus = &bus;
    targets.radar = &pipe;
    targets.clock = &clock;
    targets.session_id = run.session_id;
    run.served = sim::serve(run.generated, targets, speed, cancel);

    collector.drain();
    clock.set(script.start_epoch_ms + script.duration_ms);
    run.summary = collector.stop_session(run.session_id);
    return run;
}

} // namespace cabin::collector
