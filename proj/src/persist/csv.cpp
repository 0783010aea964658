#include "cabin/persist/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "cabin/core/errors.hpp"

namespace cabin::persist {

std::string csv_header() {
    std::string h;
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        if (i) h += ',';
        h += kCsvColumns[i];
    }
    return h;
}

std::string format_real(double v) {
    if (!std::isfinite(v)) throw ValidationError("cannot format a non-finite value");
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 4);
    if (ec != std::errc{}) throw ValidationError("value too large to format");
    std::string s(buf, end);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

namespace {

void put(std::string& line, const std::optional<double>& v) {
    line += ',';
    if (v) line += format_real(*v);
}

void put(std::string& line, const std::optional<Source>& s) {
    line += ',';
    if (s) line += to_string(*s);
}

void put(std::string& line, bool b) {
    line += ',';
    line += b ? "true" : "false";
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

[[noreturn]] void bad(std::size_t line_no, std::string_view column, std::string_view text) {
    throw ParseError("line " + std::to_string(line_no) + ": bad value '" + std::string(text) + "' in column " +
                     std::string(column));
}

std::optional<double> opt_real(std::string_view f, std::size_t line_no, std::string_view column) {
    if (f.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) bad(line_no, column, f);
    return v;
}

std::optional<Source> opt_source(std::string_view f, std::size_t line_no, std::string_view column) {
    if (f.empty()) return std::nullopt;
    if (f == "radar") return Source::radar;
    if (f == "wearable") return Source::wearable;
    bad(line_no, column, f);
}

bool boolean(std::string_view f, std::size_t line_no, std::string_view column) {
    if (f == "true") return true;
    if (f == "false") return false;
    bad(line_no, column, f);
}

} // namespace

std::string format_row(const FusedRow& r) {
    std::string line = std::to_string(r.grid_ts_ms);
    put(line, r.hr_bpm);
    put(line, r.hr_source);
    put(line, r.rr_bpm);
    put(line, r.rr_source);
    put(line, r.hrv_rmssd_ms);
    put(line, r.drowsiness_physio);
    put(line, r.perclos);
    put(line, r.blink_rate_per_min);
    put(line, r.long_blink_rate_per_min);
    put(line, r.attention);
    put(line, r.drowsiness_camera);
    line += ',';
    line += to_string(r.warning);
    put(line, r.radar_reliable);
    put(line, r.wearable_fresh);
    put(line, r.camera_fresh);
    return line;
}

FusedRow parse_row(std::string_view line, std::size_t line_no) {
    const auto f = split(line);
    if (f.size() != kCsvColumns.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(kCsvColumns.size()) +
                         " fields, got " + std::to_string(f.size()));
    }
    FusedRow r;
    {
        auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), r.grid_ts_ms);
        if (f[0].empty() || ec != std::errc{} || ptr != f[0].data() + f[0].size()) bad(line_no, kCsvColumns[0], f[0]);
    }
    r.hr_bpm = opt_real(f[1], line_no, kCsvColumns[1]);
    r.hr_source = opt_source(f[2], line_no, kCsvColumns[2]);
    r.rr_bpm = opt_real(f[3], line_no, kCsvColumns[3]);
    r.rr_source = opt_source(f[4], line_no, kCsvColumns[4]);
    r.hrv_rmssd_ms = opt_real(f[5], line_no, kCsvColumns[5]);
    r.drowsiness_physio = opt_real(f[6], line_no, kCsvColumns[6]);
    r.perclos = opt_real(f[7], line_no, kCsvColumns[7]);
    r.blink_rate_per_min = opt_real(f[8], line_no, kCsvColumns[8]);
    r.long_blink_rate_per_min = opt_real(f[9], line_no, kCsvColumns[9]);
    r.attention = opt_real(f[10], line_no, kCsvColumns[10]);
    r.drowsiness_camera = opt_real(f[11], line_no, kCsvColumns[11]);
    try {
        r.warning = parse_warning(f[12]);
    } catch (const ValidationError&) {
        bad(line_no, kCsvColumns[12], f[12]);
    }
    r.radar_reliable = boolean(f[13], line_no, kCsvColumns[13]);
    r.wearable_fresh = boolean(f[14], line_no, kCsvColumns[14]);
    r.camera_fresh = boolean(f[15], line_no, kCsvColumns[15]);
    try {
        validate(r);
    } catch (const ValidationError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    return r;
}

CsvWriter::CsvWriter(std::ostream& out, std::chrono::milliseconds flush_interval)
    : out_(out), flush_interval_(flush_interval), last_flush_(std::chrono::steady_clock::now()) {
    out_ << csv_header() << '\n';
    check("header");
}

void CsvWriter::check(const char* what) {
    if (!out_) throw IoError(std::string("CSV write failed (") + what + ")", rows_);
}

void CsvWriter::write(const FusedRow& row) {
    out_ << format_row(row) << '\n';
    check("row");
    ++rows_;
    const auto now = std::chrono::steady_clock::now();
    if (now - last_flush_ >= flush_interval_) flush();
}

void CsvWriter::flush() {
    out_.flush();
    check("flush");
    last_flush_ = std::chrono::steady_clock::now();
}

std::size_t write_csv(std::span<const FusedRow> rows, std::ostream& out) {
    CsvWriter w(out);
    for (const auto& r : rows) w.write(r);
    w.flush();
    return w.rows();
}

std::size_t write_csv_file(std::span<const FusedRow> rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return write_csv(rows, out);
}

std::vector<FusedRow> read_csv(std::istream& in) {
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<FusedRow> rows;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": truncated (no line terminator)");
        }
        std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        if (!header_seen) {
            if (line != csv_header()) {
                throw SchemaError("CSV header mismatch: expected '" + csv_header() + "', got '" + std::string(line) +
                                  "'");
            }
            header_seen = true;
            continue;
        }
        rows.push_back(parse_row(line, line_no));
    }
    if (!header_seen) throw SchemaError("CSV header mismatch: expected '" + csv_header() + "', got empty input");
    return rows;
}

std::vector<FusedRow> read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_csv(in);
}

} // namespace cabin::persist
