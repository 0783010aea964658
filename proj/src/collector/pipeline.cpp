#include "cabin/collector/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>

#include "cabin/core/errors.hpp"
#include "cabin/persist/csv.hpp"

namespace cabin::collector {

namespace {

align::GridConfig with_windows(align::GridConfig grid, const fusion::FusionConfig& fusion) {
    fusion.apply_windows(grid);
    return grid;
}

} // namespace

Pipeline::Pipeline(align::GridConfig grid, fusion::FusionConfig fusion)
    : aligner_(with_windows(std::move(grid), fusion)), engine_(std::move(fusion)) {}

Pipeline::Outcome Pipeline::ingest(const TimedRecord& r, std::vector<FusedRow>& rows_out) {
    if (r.source != Source::radar && r.source != Source::wearable && r.source != Source::camera) {
        return Outcome::ignored;
    }
    Outcome outcome = Outcome::accepted;
    switch (aligner_.ingest(r)) {
    case align::IngestResult::duplicate: return Outcome::duplicate;
    case align::IngestResult::ignored: return Outcome::ignored;
    case align::IngestResult::late: outcome = Outcome::late; break;
    default: break;
    }

    max_wall_ = max_wall_ ? std::max(*max_wall_, r.wall_ts_ms) : r.wall_ts_ms;
    fuse(aligner_.advance(*max_wall_), rows_out);
    return outcome;
}

std::vector<FusedRow> Pipeline::idle(Millis now_wall_ms) {
    std::vector<FusedRow> rows;
    if (max_wall_ && now_wall_ms > *max_wall_) fuse(aligner_.advance(now_wall_ms), rows);
    return rows;
}

std::vector<FusedRow> Pipeline::finish() {
    std::vector<FusedRow> rows;
    fuse(aligner_.finish(), rows);
    return rows;
}

void Pipeline::fuse(const std::vector<align::AlignedSnapshot>& snaps, std::vector<FusedRow>& out) {
    for (const auto& s : snaps) {
        out.push_back(engine_.process(s));
        const std::pair<Source, bool> flags[] = {
            {Source::radar, s.radar_fresh}, {Source::wearable, s.wearable_fresh}, {Source::camera, s.camera_fresh}};
        for (const auto& [src, fresh] : flags) {
            auto& f = freshness_[src];
            ++(fresh ? f.fresh_rows : f.stale_rows);
            last_fresh_[src] = fresh;
        }
    }
}

std::vector<FusedRow> replay(std::span<align::RecordReader* const> readers, const align::GridConfig& grid,
                             const fusion::FusionConfig& fusion) {
    std::vector<TimedRecord> all;
    for (auto* r : readers) {
        auto recs = r->read_all();
        all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    align::sort_for_replay(all);

    Pipeline p(grid, fusion);
    std::vector<FusedRow> rows;
    for (const auto& r : all) p.ingest(r, rows);
    auto tail = p.finish();
    rows.insert(rows.end(), tail.begin(), tail.end());
    return rows;
}

std::size_t replay_dir_to_csv(const std::string& dir, const std::string& out_csv, const align::GridConfig& grid,
                              const fusion::FusionConfig& fusion) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw ReplayError("log directory '" + dir + "' does not exist");
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (e.path().extension() == ".jsonl") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ReplayError("no .jsonl logs in '" + dir + "'");

    std::vector<std::unique_ptr<align::JsonLinesReader>> owned;
    std::vector<align::RecordReader*> readers;
    for (const auto& p : paths) {
        owned.push_back(std::make_unique<align::JsonLinesReader>(p));
        readers.push_back(owned.back().get());
    }
    const auto rows = replay(readers, grid, fusion);
    return persist::write_csv_file(rows, out_csv);
}

} // namespace cabin::collector
