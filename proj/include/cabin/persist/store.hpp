#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cabin/core/model.hpp"

namespace cabin::persist {

/// Narrow document-store contract; a database client can stand behind it.
class DocumentStore {
public:
    virtual ~DocumentStore() = default;

    virtual void append(const TimedRecord& record) = 0;

    /// Records with t0 <= wall_ts_ms <= t1, ordered by wall_ts_ms then append
    /// order. Unknown sessions yield an empty result.
    virtual std::vector<TimedRecord> query(const std::string& session_id, std::optional<Source> source, Millis t0,
                                           Millis t1) const = 0;
};

/// Wraps a fused row as a store record for the given session.
TimedRecord fused_record(const std::string& session_id, const FusedRow& row, std::uint64_t seq, Millis wall_ts_ms);

struct StoreStats {
    std::size_t records = 0;
    std::size_t corrupt_lines = 0;
};

/// One "{session_id}.jsonl" file per session with an in-memory
/// (source, wall_ts) index rebuilt from disk when a session is first touched.
class JsonLinesStore final : public DocumentStore {
public:
    struct Options {
        bool fsync_each_append = false;
    };

    explicit JsonLinesStore(std::filesystem::path dir);
    JsonLinesStore(std::filesystem::path dir, Options options);
    ~JsonLinesStore() override;

    JsonLinesStore(const JsonLinesStore&) = delete;
    JsonLinesStore& operator=(const JsonLinesStore&) = delete;

    void append(const TimedRecord& record) override;
    std::vector<TimedRecord> query(const std::string& session_id, std::optional<Source> source, Millis t0,
                                   Millis t1) const override;

    /// Every record of a session, ordered as by query().
    std::vector<TimedRecord> all(const std::string& session_id) const;

    /// Session ids with a file in the store directory.
    std::vector<std::string> sessions() const;
    StoreStats stats(const std::string& session_id) const;

    /// Creates the session file if needed.
    void open_session(const std::string& session_id);

    /// Releases the file handle of a finished session.
    void close_session(const std::string& session_id);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path path_for(const std::string& session_id) const;

private:
    struct Entry {
        Millis wall_ts_ms;
        std::uint64_t ordinal;
        std::uint64_t offset;
        std::uint32_t length;
    };
    struct SessionFile {
        int fd = -1;
        std::uint64_t size = 0;
        std::uint64_t next_ordinal = 0;
        std::size_t corrupt_lines = 0;
        std::map<Source, std::vector<Entry>> index;
    };

    SessionFile* find_loaded(const std::string& session_id) const;
    SessionFile& load(const std::string& session_id) const;
    std::string read_span(const SessionFile& f, const Entry& e) const;

    std::filesystem::path dir_;
    Options options_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, std::unique_ptr<SessionFile>> files_;
};

} // namespace cabin::persist
