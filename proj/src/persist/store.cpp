#include "cabin/persist/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <limits>
#include <mutex>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"

namespace cabin::persist {

namespace fs = std::filesystem;

namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, const char* data, std::size_t n, const fs::path& path) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw IoError("append to '" + path.string() + "' failed: " + errno_text());
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

bool entry_less(Millis ts, std::uint64_t ordinal, Millis ts2, std::uint64_t ordinal2) {
    return ts != ts2 ? ts < ts2 : ordinal < ordinal2;
}

} // namespace

TimedRecord fused_record(const std::string& session_id, const FusedRow& row, std::uint64_t seq, Millis wall_ts_ms) {
    TimedRecord r;
    r.session_id = session_id;
    r.source = Source::fused;
    r.seq = static_cast<std::int64_t>(seq);
    r.device_ts_ms = row.grid_ts_ms;
    r.wall_ts_ms = wall_ts_ms;
    r.payload = row;
    return r;
}

JsonLinesStore::JsonLinesStore(fs::path dir) : JsonLinesStore(std::move(dir), Options{}) {}

JsonLinesStore::JsonLinesStore(fs::path dir, Options options) : dir_(std::move(dir)), options_(options) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
        throw IoError("cannot create store directory '" + dir_.string() + "': " + ec.message());
    }
}

JsonLinesStore::~JsonLinesStore() {
    for (auto& [id, f] : files_) {
        if (f->fd >= 0) ::close(f->fd);
    }
}

fs::path JsonLinesStore::path_for(const std::string& session_id) const { return dir_ / (session_id + ".jsonl"); }

JsonLinesStore::SessionFile* JsonLinesStore::find_loaded(const std::string& session_id) const {
    auto it = files_.find(session_id);
    return it == files_.end() ? nullptr : it->second.get();
}

JsonLinesStore::SessionFile& JsonLinesStore::load(const std::string& session_id) const {
    if (auto* f = find_loaded(session_id)) return *f;
    validate_session_id(session_id);

    const auto path = path_for(session_id);
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open '" + path.string() + "': " + errno_text());

    auto file = std::make_unique<SessionFile>();
    file->fd = fd;

    // Rebuild the index from whatever is on disk.
    std::string text;
    {
        struct stat st {};
        if (::fstat(fd, &st) != 0) {
            ::close(fd);
            throw IoError("cannot stat '" + path.string() + "': " + errno_text());
        }
        text.resize(static_cast<std::size_t>(st.st_size));
        std::size_t got = 0;
        while (got < text.size()) {
            const ssize_t r = ::pread(fd, text.data() + got, text.size() - got, static_cast<off_t>(got));
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) {
                ::close(fd);
                throw IoError("cannot read '" + path.string() + "': " + errno_text());
            }
            got += static_cast<std::size_t>(r);
        }
    }

    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            // Unterminated final line. A fragment fails to decode below and is
            // counted there; later appends start on a fresh line either way.
            write_all(fd, "\n", 1, path);
            text.push_back('\n');
            nl = text.size() - 1;
        }
        const std::string_view line(text.data() + pos, nl - pos);
        if (!line.empty()) {
            try {
                const auto rec = decode_record(line);
                file->index[rec.source].push_back(
                    Entry{rec.wall_ts_ms, file->next_ordinal, pos, static_cast<std::uint32_t>(line.size())});
            } catch (const Error&) {
                ++file->corrupt_lines;
            }
        }
        ++file->next_ordinal;
        pos = nl + 1;
    }
    file->size = text.size();
    for (auto& [src, entries] : file->index) {
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return entry_less(a.wall_ts_ms, a.ordinal, b.wall_ts_ms, b.ordinal);
        });
    }

    auto& ref = *file;
    files_.emplace(session_id, std::move(file));
    return ref;
}

void JsonLinesStore::append(const TimedRecord& record) {
    validate(record);
    std::string line = encode_record(record);
    line.push_back('\n');

    std::unique_lock lock(mutex_);
    auto& f = load(record.session_id);
    write_all(f.fd, line.data(), line.size(), path_for(record.session_id));
    if (options_.fsync_each_append && ::fsync(f.fd) != 0) {
        throw IoError("fsync of '" + path_for(record.session_id).string() + "' failed: " + errno_text());
    }

    const Entry e{record.wall_ts_ms, f.next_ordinal++, f.size, static_cast<std::uint32_t>(line.size() - 1)};
    f.size += line.size();
    auto& entries = f.index[record.source];
    auto at = std::upper_bound(entries.begin(), entries.end(), e, [](const Entry& a, const Entry& b) {
        return entry_less(a.wall_ts_ms, a.ordinal, b.wall_ts_ms, b.ordinal);
    });
    entries.insert(at, e);
}

std::string JsonLinesStore::read_span(const SessionFile& f, const Entry& e) const {
    std::string buf(e.length, '\0');
    std::size_t got = 0;
    while (got < buf.size()) {
        const ssize_t r =
            ::pread(f.fd, buf.data() + got, buf.size() - got, static_cast<off_t>(e.offset + got));
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) throw IoError("store read failed: " + errno_text());
        got += static_cast<std::size_t>(r);
    }
    return buf;
}

std::vector<TimedRecord> JsonLinesStore::query(const std::string& session_id, std::optional<Source> source, Millis t0,
                                               Millis t1) const {
    if (t0 > t1) throw ValidationError("query range requires t0 <= t1");
    {
        std::shared_lock probe(mutex_);
        if (!find_loaded(session_id)) {
            probe.unlock();
            std::error_code ec;
            if (session_id.empty() || session_id.find('/') != std::string::npos ||
                !fs::exists(path_for(session_id), ec)) {
                return {};
            }
            std::unique_lock lock(mutex_);
            load(session_id);
        }
    }

    std::shared_lock lock(mutex_);
    const auto* f = find_loaded(session_id);
    if (!f) return {};

    std::vector<const Entry*> hits;
    for (const auto& [src, entries] : f->index) {
        if (source && src != *source) continue;
        auto lo = std::lower_bound(entries.begin(), entries.end(), t0,
                                   [](const Entry& e, Millis t) { return e.wall_ts_ms < t; });
        auto hi = std::upper_bound(entries.begin(), entries.end(), t1,
                                   [](Millis t, const Entry& e) { return t < e.wall_ts_ms; });
        for (auto it = lo; it != hi; ++it) hits.push_back(&*it);
    }
    std::sort(hits.begin(), hits.end(), [](const Entry* a, const Entry* b) {
        return entry_less(a->wall_ts_ms, a->ordinal, b->wall_ts_ms, b->ordinal);
    });

    std::vector<TimedRecord> out;
    out.reserve(hits.size());
    for (const auto* e : hits) out.push_back(decode_record(read_span(*f, *e)));
    return out;
}

std::vector<TimedRecord> JsonLinesStore::all(const std::string& session_id) const {
    auto recs = query(session_id, std::nullopt, std::numeric_limits<Millis>::min(), std::numeric_limits<Millis>::max());
    return recs;
}

std::vector<std::string> JsonLinesStore::sessions() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_, ec)) {
        if (entry.path().extension() == ".jsonl") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

StoreStats JsonLinesStore::stats(const std::string& session_id) const {
    std::unique_lock lock(mutex_);
    std::error_code ec;
    if (!find_loaded(session_id) && !fs::exists(path_for(session_id), ec)) return {};
    const auto& f = load(session_id);
    StoreStats s;
    for (const auto& [src, entries] : f.index) s.records += entries.size();
    s.corrupt_lines = f.corrupt_lines;
    return s;
}

void JsonLinesStore::open_session(const std::string& session_id) {
    std::unique_lock lock(mutex_);
    load(session_id);
}

void JsonLinesStore::close_session(const std::string& session_id) {
    std::unique_lock lock(mutex_);
    auto it = files_.find(session_id);
    if (it == files_.end()) return;
    if (it->second->fd >= 0) ::close(it->second->fd);
    files_.erase(it);
}

} // namespace cabin::persist
