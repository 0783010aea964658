#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cabin/align/aligner.hpp"
#include "cabin/core/model.hpp"
#include "cabin/fusion/fusion.hpp"

namespace cabin::collector {

struct Freshness {
    std::uint64_t fresh_rows = 0;
    std::uint64_t stale_rows = 0;

    bool operator==(const Freshness&) const = default;
};

/// Alignment, metrics and fusion for one session. Time advances with the
/// largest wall timestamp seen, so the output depends only on the records
/// and their order, never on arrival pace.
class Pipeline {
public:
    Pipeline(align::GridConfig grid, fusion::FusionConfig fusion);

    /// What ingest() did with a record. Records still waiting for their lane to
    /// calibrate count as accepted.
    enum class Outcome { accepted, duplicate, late, ignored };

    Outcome ingest(const TimedRecord& r, std::vector<FusedRow>& rows_out);
    /// Advances on a wall clock while no records arrive.
    std::vector<FusedRow> idle(Millis now_wall_ms);
    std::vector<FusedRow> finish();

    const align::Aligner& aligner() const noexcept { return aligner_; }
    const fusion::FusionEngine& engine() const noexcept { return engine_; }
    const std::map<Source, Freshness>& freshness() const noexcept { return freshness_; }
    /// Freshness flags of the latest snapshot.
    const std::map<Source, bool>& last_fresh() const noexcept { return last_fresh_; }

private:
    void fuse(const std::vector<align::AlignedSnapshot>& snaps, std::vector<FusedRow>& out);

    align::Aligner aligner_;
    fusion::FusionEngine engine_;
    std::optional<Millis> max_wall_;
    std::map<Source, Freshness> freshness_;
    std::map<Source, bool> last_fresh_;
};

/// Offline mode: every record from every reader, merged by wall time, pushed
/// through a Pipeline exactly as the live collector does.
std::vector<FusedRow> replay(std::span<align::RecordReader* const> readers, const align::GridConfig& grid,
                             const fusion::FusionConfig& fusion);

/// Reads every *.jsonl file in dir (sorted by name) and writes the fused CSV.
/// Returns the row count. Throws ReplayError or IoError.
std::size_t replay_dir_to_csv(const std::string& dir, const std::string& out_csv, const align::GridConfig& grid,
                              const fusion::FusionConfig& fusion);

} // namespace cabin::collector
