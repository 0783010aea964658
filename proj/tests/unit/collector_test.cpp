#include <gtest/gtest.h>

#include <httplib.h>

#include "cabin/collector/api.hpp"
#include "cabin/collector/config.hpp"
#include "cabin/collector/service.hpp"
#include "cabin/collector/simulate.hpp"
#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"
#include "cabin/sim/scenario.hpp"
#include "cabin/transport/bus.hpp"
#include "cabin/transport/bytes.hpp"
#include "cabin/transport/clock.hpp"
#include "temp_dir.hpp"

using namespace cabin;
using namespace cabin::collector;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

constexpr Millis kEpoch = 1'700'000'000'000;

sim::ScenarioScript minute_script(Millis duration = 60000) {
    sim::ScenarioScript s;
    s.seed = 11;
    s.duration_ms = duration;
    s.start_epoch_ms = kEpoch;
    s.segments = {{0, duration, sim::SegmentKind::alert, {}}};
    return s;
}

// Hermetic collector driven by hand.
struct Rig {
    testutil::TempDir dir{"collector"};
    transport::InProcessBus bus;
    transport::InProcessPipe pipe;
    transport::ManualClock clock{kEpoch};
    std::unique_ptr<Collector> c;

    explicit Rig(std::size_t stream_limit = 1024) {
        auto cfg = inproc_config(dir.str());
        cfg.stream_queue_limit = stream_limit;
        c = std::make_unique<Collector>(cfg, CollectorIo{&clock, &bus, &pipe});
    }

    sim::SimOutput feed(const sim::ScenarioScript& s, const std::string& id) {
        auto out = sim::generate(s, id);
        serve(out, id);
        return out;
    }

    void serve(const sim::SimOutput& out, std::string id = "") {
        if (id.empty()) id = *c->session_id();
        sim::ServeTargets t;
        t.bus = &bus;
        t.radar = &pipe;
        t.clock = &clock;
        t.session_id = id;
        sim::serve(out, t, 0);
        c->drain();
    }
};

std::vector<StreamEvent> drain_events(StreamSubscription& sub) {
    std::vector<StreamEvent> out;
    while (auto e = sub.next(0ms)) out.push_back(*e);
    return out;
}

std::vector<std::string> rows_of(const std::vector<StreamEvent>& events) {
    std::vector<std::string> rows;
    for (const auto& e : events) {
        if (e.type == "row") rows.push_back(e.data);
    }
    return rows;
}

} // namespace

TEST(Config, StrictReader) {
    const auto c = inproc_config("x");
    EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
    auto j = config_to_json(c);
    j["storage_dirr"] = "typo";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = config_to_json(c);
    j["sources"]["radar"]["kind"] = "usb";
    EXPECT_THROW(config_from_json(j).validate(), ConfigError);
    j = config_to_json(c);
    j["grid"]["step_ms"] = 0;
    EXPECT_THROW(config_from_json(j).validate(), ConfigError);
    CollectorConfig none;
    EXPECT_EQ(none.enabled_sources(), 0u);
    EXPECT_THROW(none.validate(true), ConfigError);
    EXPECT_NO_THROW(none.validate(false));
}

TEST(Config, EnvironmentOverridesPath) {
    ::unsetenv("CABIN_CONFIG");
    EXPECT_THROW(resolve_config_path(std::nullopt), ConfigError);
    EXPECT_EQ(resolve_config_path(std::string("a.json")), "a.json");
    ::setenv("CABIN_CONFIG", "b.json", 1);
    EXPECT_EQ(resolve_config_path(std::string("a.json")), "b.json");
    ::unsetenv("CABIN_CONFIG");
    EXPECT_THROW(load_config("/nonexistent/cabin.json"), ConfigError);
}

TEST(Ulid, SortableAndUnique) {
    std::mt19937_64 rng(1);
    const auto a = make_ulid(1000, rng);
    const auto b = make_ulid(1000, rng);
    const auto c = make_ulid(1001, rng);
    EXPECT_EQ(a.size(), 26u);
    EXPECT_NE(a, b);
    EXPECT_LT(std::max(a, b), c);
    EXPECT_EQ(a.find_first_not_of("0123456789ABCDEFGHJKMNPQRSTVWXYZ"), std::string::npos);
    EXPECT_EQ(make_ulid(0, rng).substr(0, 10), "0000000000");
}

TEST(Lifecycle, IdleStatus) {
    Rig rig;
    const auto s = rig.c->status();
    EXPECT_EQ(s["state"], "idle");
    EXPECT_TRUE(s["sources"].empty());
    EXPECT_FALSE(rig.c->session_id());
}

TEST(Lifecycle, StartAnnotateStop) {
    Rig rig;
    const auto id = rig.c->start_session();
    EXPECT_EQ(rig.c->status()["state"], "running");
    EXPECT_EQ(rig.c->status()["session_id"], id);
    EXPECT_THROW(rig.c->start_session(), StateError);

    rig.feed(minute_script(), id);
    rig.c->annotate(id, Annotation{0, AnnotationKind::kss, std::int64_t{7}});
    EXPECT_THROW(rig.c->annotate(id, Annotation{0, AnnotationKind::kss, std::int64_t{0}}), ValidationError);
    EXPECT_THROW(rig.c->annotate("other", Annotation{0, AnnotationKind::kss, std::int64_t{5}}), NotFoundError);
    rig.c->annotate(id, Annotation{0, AnnotationKind::marker, std::string("MWT2 start")});

    const auto stored = rig.c->store().query(id, Source::annotation, kEpoch, kEpoch + 120000);
    ASSERT_EQ(stored.size(), 2u);
    const auto& kss = std::get<Annotation>(stored[0].payload);
    EXPECT_EQ(kss.kind, AnnotationKind::kss);
    EXPECT_EQ(std::get<std::int64_t>(kss.value), 7);
    const auto& marker = std::get<Annotation>(stored[1].payload);
    EXPECT_EQ(marker.ts_ms, rig.clock.now_ms());
    EXPECT_EQ(stored[1].wall_ts_ms, rig.clock.now_ms());

    const auto summary = rig.c->stop_session(id);
    EXPECT_EQ(summary.session_id, id);
    EXPECT_EQ(summary.rows, 59u);
    ASSERT_EQ(summary.annotations.size(), 2u);
    EXPECT_EQ(summary.annotations[0].kind, AnnotationKind::kss);
    EXPECT_EQ(rig.c->status()["state"], "closed");
    EXPECT_EQ(rig.c->status()["summary"]["rows"], 59);
    EXPECT_THROW(rig.c->stop_session(id), NotFoundError);
    EXPECT_THROW(rig.c->annotate(id, Annotation{0, AnnotationKind::kss, std::int64_t{5}}), StateError);

    EXPECT_TRUE(std::filesystem::exists(summary.csv_path));
    EXPECT_TRUE(std::filesystem::exists(summary.meta_path));
    const auto meta = session_meta_from_json(json::parse(testutil::slurp(summary.meta_path)));
    EXPECT_EQ(meta.session_id, id);
    EXPECT_EQ(meta.annotations.size(), 2u);

    // A closed collector can start the next session.
    const auto next = rig.c->start_session();
    EXPECT_NE(next, id);
    rig.c->stop_session(next);
}

TEST(Lifecycle, AnnotationEchoedOnFusedTopic) {
    Rig rig;
    const auto id = rig.c->start_session();
    std::vector<std::string> echoed;
    rig.bus.subscribe("cabin/+/fused", [&](const std::string&, const std::string& p) { echoed.push_back(p); });
    rig.c->annotate(id, Annotation{kEpoch + 5, AnnotationKind::ess, std::int64_t{12}});
    ASSERT_EQ(echoed.size(), 1u);
    const auto r = decode_record(echoed[0]);
    EXPECT_EQ(r.source, Source::annotation);
    EXPECT_EQ(std::get<Annotation>(r.payload).ts_ms, kEpoch + 5);
    rig.c->stop_session(id);
}

TEST(Lifecycle, ZeroSourcesRejected) {
    testutil::TempDir dir;
    CollectorConfig cfg;
    cfg.storage_dir = dir.str();
    transport::ManualClock clock;
    Collector c(cfg, CollectorIo{&clock, nullptr, nullptr});
    EXPECT_THROW(c.start_session(), ConfigError);
    EXPECT_EQ(c.status()["state"], "idle");
}

TEST(Lifecycle, FusedRowsPublished) {
    Rig rig;
    const auto id = rig.c->start_session();
    std::size_t fused = 0;
    rig.bus.subscribe("cabin/" + id + "/fused", [&](const std::string&, const std::string& p) {
        if (decode_record(p).source == Source::fused) ++fused;
    });
    rig.feed(minute_script(), id);
    rig.c->stop_session(id);
    EXPECT_EQ(fused, 59u);
}

TEST(Stream, RowsInOrderAndConsumersAgree) {
    Rig rig;
    const auto id = rig.c->start_session();
    auto a = rig.c->subscribe();
    auto b = rig.c->subscribe();
    rig.feed(minute_script(61000), id);
    rig.c->stop_session(id);

    const auto ea = drain_events(*a);
    const auto eb = drain_events(*b);
    ASSERT_FALSE(ea.empty());
    EXPECT_EQ(ea.front().type, "status");
    const auto ra = rows_of(ea);
    ASSERT_EQ(ra.size(), 60u);
    EXPECT_EQ(ra, rows_of(eb));
    Millis prev = 0;
    for (const auto& r : ra) {
        const auto row = fused_row_from_json(json::parse(r));
        EXPECT_GT(row.grid_ts_ms, prev);
        prev = row.grid_ts_ms;
    }
    EXPECT_EQ(ea.back().type, "status");
    EXPECT_EQ(json::parse(ea.back().data)["state"], "closed");
}

TEST(Stream, MidSessionConsumerGetsSnapshotThenLiveRows) {
    Rig rig;
    const auto id = rig.c->start_session();
    auto early = rig.c->subscribe();
    const auto out = sim::generate(minute_script(120000), id);
    const Millis cut = kEpoch + 60000;
    sim::SimOutput head, tail;
    for (const auto& f : out.radar) (f.send_wall_ms < cut ? head : tail).radar.push_back(f);
    for (const auto& r : out.wearable) (r.send_wall_ms < cut ? head : tail).wearable.push_back(r);
    for (const auto& r : out.camera) (r.send_wall_ms < cut ? head : tail).camera.push_back(r);

    rig.serve(head);
    auto late = rig.c->subscribe();
    const auto before = rows_of(drain_events(*early));
    const auto el = drain_events(*late);
    ASSERT_EQ(el.size(), 1u);
    EXPECT_EQ(el[0].type, "status");
    const auto snap = json::parse(el[0].data);
    EXPECT_EQ(snap["state"], "running");
    EXPECT_EQ(snap["counters"]["rows"], before.size());

    rig.serve(tail);
    rig.c->stop_session(id);
    const auto after_late = rows_of(drain_events(*late));
    const auto after_early = rows_of(drain_events(*early));
    EXPECT_EQ(before.size() + after_late.size(), 119u);
    EXPECT_EQ(after_late, after_early);
}

TEST(Stream, SlowConsumerIsDisconnected) {
    Rig rig(48);
    const auto id = rig.c->start_session();
    auto slow = rig.c->subscribe();
    auto fast = rig.c->subscribe();
    const auto out = sim::generate(minute_script(180000), id);
    std::vector<StreamEvent> fast_events;
    // Serve in 5 s slices; the fast consumer catches up after each one.
    for (Millis cut = kEpoch; cut < kEpoch + 190000; cut += 5000) {
        sim::SimOutput slice;
        for (const auto& f : out.radar) {
            if (f.send_wall_ms >= cut && f.send_wall_ms < cut + 5000) slice.radar.push_back(f);
        }
        for (const auto& r : out.wearable) {
            if (r.send_wall_ms >= cut && r.send_wall_ms < cut + 5000) slice.wearable.push_back(r);
        }
        for (const auto& r : out.camera) {
            if (r.send_wall_ms >= cut && r.send_wall_ms < cut + 5000) slice.camera.push_back(r);
        }
        rig.serve(slice);
        for (const auto& e : drain_events(*fast)) fast_events.push_back(e);
    }
    rig.c->stop_session(id);
    for (const auto& e : drain_events(*fast)) fast_events.push_back(e);
    EXPECT_TRUE(slow->overflowed());
    EXPECT_TRUE(slow->closed());
    EXPECT_FALSE(fast->overflowed());
    EXPECT_EQ(rows_of(fast_events).size(), 179u);
}

TEST(Health, DropoutVisibleInFreshnessAndStatus) {
    Rig rig;
    const auto id = rig.c->start_session();
    auto s = minute_script(120000);
    sim::SegmentParams p;
    p.source = Source::radar;
    s.segments.push_back({60000, 120000, sim::SegmentKind::dropout, p});
    rig.feed(s, id);

    const auto st = rig.c->status();
    EXPECT_GE(st["sources"]["radar"]["last_seen_age_ms"].get<Millis>(), 10000);
    EXPECT_FALSE(st["sources"]["radar"]["radar_reliable"].get<bool>());
    EXPECT_FALSE(st["sources"]["radar"]["fresh"].get<bool>());
    EXPECT_TRUE(st["sources"]["camera"]["fresh"].get<bool>());
    EXPECT_LT(st["sources"]["camera"]["last_seen_age_ms"].get<Millis>(), 1000);

    const auto summary = rig.c->stop_session(id);
    const auto& radar = summary.sources.at(Source::radar);
    EXPECT_GE(radar.freshness.stale_rows, 50u);
    EXPECT_GE(radar.freshness.fresh_rows, 50u);
    EXPECT_LE(summary.sources.at(Source::camera).freshness.stale_rows, 2u);
}

TEST(Health, MotionClearsRadarReliability) {
    Rig rig;
    const auto id = rig.c->start_session();
    auto s = minute_script(120000);
    s.segments.push_back({60000, 120000, sim::SegmentKind::motion, {}});
    auto sub = rig.c->subscribe();
    rig.feed(s, id);
    rig.c->stop_session(id);
    const auto window = rig.c->config().fusion.reliability.radar_distance_window_ms;
    for (const auto& r : rows_of(drain_events(*sub))) {
        const auto row = fused_row_from_json(json::parse(r));
        const Millis t = row.grid_ts_ms - kEpoch;
        if (t >= 60000 + window) EXPECT_FALSE(row.radar_reliable) << t;
        if (t > 20000 && t < 60000) EXPECT_TRUE(row.radar_reliable) << t;
    }
}

TEST(Invariants, StoredPlusDroppedEqualsGenerated) {
    Rig rig;
    const auto id = rig.c->start_session();
    const auto out = rig.feed(minute_script(), id);
    const auto summary = rig.c->stop_session(id);
    std::size_t stored = 0;
    for (const auto& r : rig.c->store().all(id)) {
        if (r.source == Source::radar || r.source == Source::wearable || r.source == Source::camera) ++stored;
    }
    const std::size_t generated = out.radar.size() + out.wearable.size() + out.camera.size();
    EXPECT_EQ(generated, stored + summary.late_drops + summary.duplicates + summary.frames_bad_checksum);
    EXPECT_EQ(summary.calibration_drops, 0u);
    EXPECT_EQ(summary.late_drops, 0u);
}

TEST(Invariants, CorruptRadarBytesCounted) {
    Rig rig;
    const auto id = rig.c->start_session();
    auto out = sim::generate(minute_script(), id);
    out.radar[20].bytes[6] ^= 0xFF;
    rig.serve(out);
    const auto summary = rig.c->stop_session(id);
    EXPECT_EQ(summary.frames_bad_checksum, 1u);
    EXPECT_EQ(summary.sources.at(Source::radar).records, 59u);
}

TEST(Invariants, SpeedDoesNotChangeOutput) {
    testutil::TempDir a, b;
    const auto s = minute_script();
    auto ca = inproc_config(a.str());
    auto cb = inproc_config(b.str());
    const auto fast = run_local(s, ca, 0);
    const auto paced = run_local(s, cb, 60);
    EXPECT_EQ(fast.summary.rows, 59u);
    EXPECT_EQ(testutil::slurp(fast.summary.csv_path), testutil::slurp(paced.summary.csv_path));
}

TEST(Api, HttpRoundTrip) {
    Rig rig;
    ApiServer api(*rig.c, "127.0.0.1", 0);
    api.start();
    httplib::Client http("127.0.0.1", api.port());

    auto res = http.Get("/status");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["state"], "idle");

    res = http.Post("/session/start", R"({"subject_pseudo_id":"S01"})", "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const std::string id = json::parse(res->body)["session_id"];
    EXPECT_EQ(http.Post("/session/start", "{}", "application/json")->status, 409);

    rig.feed(minute_script(), id);
    res = http.Post("/session/" + id + "/annotate", R"({"kind":"kss","value":7})", "application/json");
    EXPECT_EQ(res->status, 200) << res->body;
    res = http.Post("/session/" + id + "/annotate", R"({"kind":"kss","value":12})", "application/json");
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["error"], "validation");
    EXPECT_EQ(http.Post("/session/" + id + "/annotate", "{nope", "application/json")->status, 400);
    EXPECT_EQ(http.Post("/session/zzz/annotate", R"({"kind":"kss","value":3})", "application/json")->status, 404);

    res = http.Get("/status");
    const auto st = json::parse(res->body);
    EXPECT_EQ(st["session_id"], id);
    EXPECT_EQ(st["counters"]["rows"], 59);

    res = http.Post("/session/" + id + "/stop", "", "application/json");
    ASSERT_EQ(res->status, 200) << res->body;
    const auto summary = json::parse(res->body);
    EXPECT_EQ(summary["rows"], 59);
    EXPECT_EQ(summary["annotations"].size(), 1u);
    EXPECT_EQ(summary["annotations"][0]["value"], 7);
    EXPECT_EQ(http.Post("/session/" + id + "/stop", "", "application/json")->status, 404);
    api.stop();
}

TEST(Api, EventStream) {
    Rig rig;
    ApiServer api(*rig.c, "127.0.0.1", 0);
    api.start();
    const auto id = rig.c->start_session();

    std::string body;
    std::atomic<bool> connected{false};
    std::thread consumer([&] {
        httplib::Client http("127.0.0.1", api.port());
        http.set_read_timeout(10, 0);
        http.Get("/stream", [&](const char* data, std::size_t n) {
            connected = true;
            body.append(data, n);
            return body.find("\"state\":\"closed\"") == std::string::npos;
        });
    });
    for (int i = 0; i < 300 && !connected; ++i) std::this_thread::sleep_for(10ms);
    ASSERT_TRUE(connected);
    rig.feed(minute_script(), id);
    rig.c->stop_session(id);
    consumer.join();
    api.stop();

    EXPECT_EQ(body.rfind("event: status\ndata: ", 0), 0u);
    std::size_t rows = 0;
    for (auto at = body.find("event: row\n"); at != std::string::npos; at = body.find("event: row\n", at + 1)) ++rows;
    EXPECT_EQ(rows, 59u);
}
