#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"
#include "cabin/persist/csv.hpp"
#include "cabin/persist/store.hpp"
#include "random_records.hpp"

using namespace cabin;
using namespace cabin::persist;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("cabin_persist_" + std::to_string(::getpid()) + "_" + std::to_string(n_++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    static inline int n_ = 0;
    fs::path path_;
};

/// Accepts a fixed number of bytes, then fails every write.
class FailingBuf : public std::streambuf {
public:
    explicit FailingBuf(std::size_t budget) : budget_(budget) {}

protected:
    int overflow(int c) override {
        if (budget_ == 0) return traits_type::eof();
        --budget_;
        return c;
    }
    std::streamsize xsputn(const char*, std::streamsize n) override {
        if (static_cast<std::size_t>(n) > budget_) {
            budget_ = 0;
            return 0;
        }
        budget_ -= static_cast<std::size_t>(n);
        return n;
    }

private:
    std::size_t budget_;
};

} // namespace

TEST(Csv, HeaderOnlyForNoRows) {
    std::ostringstream out;
    EXPECT_EQ(write_csv({}, out), 0u);
    EXPECT_EQ(out.str(), csv_header() + "\n");
    EXPECT_EQ(csv_header(),
              "grid_ts_ms,hr_bpm,hr_source,rr_bpm,rr_source,hrv_rmssd_ms,drowsiness_physio,perclos,"
              "blink_rate_per_min,long_blink_rate_per_min,attention,drowsiness_camera,warning,radar_reliable,"
              "wearable_fresh,camera_fresh");
}

TEST(Csv, AbsentOptionalsAreEmptyFields) {
    FusedRow r;
    r.grid_ts_ms = 1000;
    EXPECT_EQ(format_row(r), "1000,,,,,,,,,,,,normal,false,false,false");
}

TEST(Csv, RealFormatting) {
    EXPECT_EQ(format_real(72.0), "72");
    EXPECT_EQ(format_real(0.1235), "0.1235");
    EXPECT_EQ(format_real(15.5), "15.5");
    EXPECT_EQ(format_real(-0.00001), "0");
    EXPECT_EQ(format_real(123456789.0), "123456789");
    EXPECT_THROW(format_real(std::nan("")), ValidationError);
}

TEST(Csv, TwentyMinutesIs1201Lines) {
    testgen::Gen gen(1);
    std::vector<FusedRow> rows;
    for (int i = 1; i <= 20 * 60; ++i) {
        auto r = gen.fused();
        r.grid_ts_ms = 1'700'000'000'000 + 1000 * i;
        rows.push_back(r);
    }
    std::ostringstream out;
    EXPECT_EQ(write_csv(rows, out), 1200u);
    EXPECT_EQ(count_lines(out.str()), 1201u);
}

TEST(Csv, RandomizedRoundTripAndStableBytes) {
    testgen::Gen gen(77);
    for (int c = 0; c < 20; ++c) {
        std::vector<FusedRow> rows;
        for (int i = 0; i < 200; ++i) rows.push_back(gen.fused());
        std::ostringstream out;
        write_csv(rows, out);
        std::istringstream in(out.str());
        const auto back = read_csv(in);
        ASSERT_EQ(back, rows);
        std::ostringstream again;
        write_csv(back, again);
        EXPECT_EQ(again.str(), out.str());
    }
}

TEST(Csv, ReorderedColumnsAreRejected) {
    std::string header = csv_header();
    std::swap(header[0], header[1]);
    std::istringstream in("hr_bpm,grid_ts_ms" + csv_header().substr(std::string("grid_ts_ms,hr_bpm").size()) + "\n");
    try {
        read_csv(in);
        FAIL();
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("expected"), std::string::npos);
        EXPECT_NE(msg.find("hr_bpm,grid_ts_ms"), std::string::npos);
    }
}

TEST(Csv, TruncatedFinalLine) {
    FusedRow r;
    r.grid_ts_ms = 1000;
    std::istringstream in(csv_header() + "\n" + format_row(r) + "\n" + "2000,70,wear");
    try {
        read_csv(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Csv, BadFieldNamesLine) {
    FusedRow r;
    r.grid_ts_ms = 1000;
    std::string bad = format_row(r);
    bad.replace(bad.find("normal"), 6, "sleepy");
    std::istringstream in(csv_header() + "\n" + format_row(r) + "\n" + bad + "\n");
    try {
        read_csv(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Csv, WriterFailureReportsRowsWritten) {
    FusedRow r;
    r.grid_ts_ms = 1000;
    const std::size_t budget = csv_header().size() + 1 + 3 * (format_row(r).size() + 1) + 5;
    FailingBuf buf(budget);
    std::ostream out(&buf);
    CsvWriter w(out, std::chrono::milliseconds(0));
    std::size_t written = 0;
    try {
        for (int i = 0; i < 10; ++i) {
            r.grid_ts_ms += 1000;
            w.write(r);
            ++written;
        }
        FAIL();
    } catch (const IoError& e) {
        EXPECT_EQ(e.rows_written(), 3u);
        EXPECT_EQ(written, 3u);
    }
}

TEST(Csv, EmptyInputIsSchemaError) {
    std::istringstream in("");
    EXPECT_THROW(read_csv(in), SchemaError);
}

namespace {

TimedRecord wearable_at(const std::string& session, std::int64_t seq, Millis wall) {
    TimedRecord r;
    r.session_id = session;
    r.source = Source::wearable;
    r.seq = seq;
    r.device_ts_ms = wall;
    r.wall_ts_ms = wall;
    WearableSample w;
    w.device_ts = wall;
    w.hr_bpm = 70;
    r.payload = w;
    return r;
}

std::vector<TimedRecord> linear_scan(const std::vector<TimedRecord>& all, std::optional<Source> src, Millis t0,
                                     Millis t1) {
    std::vector<TimedRecord> out;
    for (const auto& r : all) {
        if (src && r.source != *src) continue;
        if (r.wall_ts_ms < t0 || r.wall_ts_ms > t1) continue;
        out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.wall_ts_ms < b.wall_ts_ms; });
    return out;
}

} // namespace

TEST(Store, AppendThenQueryExactRange) {
    TempDir dir;
    JsonLinesStore store(dir.path());
    const auto r = wearable_at("s01", 0, 5000);
    store.append(r);
    EXPECT_EQ(store.query("s01", std::nullopt, 5000, 5000), std::vector<TimedRecord>{r});
    EXPECT_TRUE(store.query("s01", std::nullopt, 5001, 9000).empty());
}

TEST(Store, FilterBySource) {
    TempDir dir;
    JsonLinesStore store(dir.path());
    testgen::Gen gen(3);
    for (int i = 0; i < 100; ++i) store.append(gen.record("s01"));
    for (const auto& r : store.query("s01", Source::radar, 0, std::numeric_limits<Millis>::max())) {
        EXPECT_EQ(r.source, Source::radar);
    }
}

TEST(Store, UnknownSessionIsEmpty) {
    TempDir dir;
    JsonLinesStore store(dir.path());
    EXPECT_TRUE(store.query("nobody", std::nullopt, 0, 100).empty());
}

TEST(Store, InvertedRangeIsRejected) {
    TempDir dir;
    JsonLinesStore store(dir.path());
    EXPECT_THROW(store.query("s01", std::nullopt, 10, 5), ValidationError);
}

TEST(Store, QueryMatchesLinearScanAndSurvivesReopen) {
    TempDir dir;
    testgen::Gen gen(99);
    std::vector<TimedRecord> all;
    {
        JsonLinesStore store(dir.path());
        for (int i = 0; i < 2000; ++i) {
            auto r = gen.record(i % 2 ? "a" : "b");
            r.wall_ts_ms = gen.integer(0, 100000);
            store.append(r);
            all.push_back(r);
        }
        for (int q = 0; q < 100; ++q) {
            const Millis t0 = gen.integer(0, 100000), t1 = gen.integer(t0, 100000);
            const auto src = gen.coin() ? std::optional<Source>(static_cast<Source>(gen.integer(0, 4))) : std::nullopt;
            std::vector<TimedRecord> a_only;
            std::copy_if(all.begin(), all.end(), std::back_inserter(a_only), [](auto& r) { return r.session_id == "a"; });
            ASSERT_EQ(store.query("a", src, t0, t1), linear_scan(a_only, src, t0, t1));
        }
    }
    JsonLinesStore first(dir.path());
    JsonLinesStore second(dir.path());
    EXPECT_EQ(first.all("a"), second.all("a"));
    EXPECT_EQ(first.all("b").size(), 1000u);
    EXPECT_EQ(first.sessions(), (std::vector<std::string>{"a", "b"}));
}

TEST(Store, TornFinalLineIsSkippedAndRepaired) {
    TempDir dir;
    {
        JsonLinesStore store(dir.path());
        store.append(wearable_at("s", 0, 1000));
        store.append(wearable_at("s", 1, 2000));
    }
    {
        std::ofstream f(dir.path() / "s.jsonl", std::ios::app);
        f << R"({"schema_version":1,"session_id":"s","sou)";
    }
    JsonLinesStore store(dir.path());
    EXPECT_EQ(store.all("s").size(), 2u);
    EXPECT_EQ(store.stats("s").corrupt_lines, 1u);
    store.append(wearable_at("s", 2, 3000));
    JsonLinesStore again(dir.path());
    EXPECT_EQ(again.all("s").size(), 3u);
}

TEST(Store, ConcurrentReadersSeeAPrefix) {
    TempDir dir;
    JsonLinesStore store(dir.path());
    std::atomic<bool> done{false};
    std::thread writer([&] {
        for (int i = 0; i < 2000; ++i) store.append(wearable_at("s", i, 1000 * i));
        done = true;
    });
    while (!done) {
        const auto got = store.query("s", std::nullopt, 0, std::numeric_limits<Millis>::max());
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i].seq, static_cast<std::int64_t>(i));
    }
    writer.join();
    EXPECT_EQ(store.all("s").size(), 2000u);
}

TEST(Store, FusedRecordHelper) {
    FusedRow row;
    row.grid_ts_ms = 7000;
    const auto r = fused_record("s", row, 4, 7000);
    EXPECT_EQ(r.source, Source::fused);
    EXPECT_EQ(r.seq, 4);
    EXPECT_EQ(r.wall_ts_ms, 7000);
    EXPECT_EQ(decode_record(encode_record(r)), r);
}
