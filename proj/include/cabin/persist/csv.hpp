#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cabin/core/model.hpp"

namespace cabin::persist {

// Session log columns. The header row is the format contract.
inline constexpr std::array<std::string_view, 16> kCsvColumns = {
    "grid_ts_ms",         "hr_bpm",     "hr_source",
    "rr_bpm",             "rr_source",  "hrv_rmssd_ms",
    "drowsiness_physio",  "perclos",    "blink_rate_per_min",
    "long_blink_rate_per_min", "attention", "drowsiness_camera",
    "warning",            "radar_reliable", "wearable_fresh",
    "camera_fresh"};

std::string csv_header();

/// At most 4 fractional digits, '.' separator, no exponent, trailing zeros
/// trimmed ("72", "0.25", "-1.5").
std::string format_real(double v);

/// One CSV line without the trailing newline. Absent optionals are empty.
std::string format_row(const FusedRow& row);

/// Throws ParseError naming line_no on a malformed line.
FusedRow parse_row(std::string_view line, std::size_t line_no);

/// Streams rows to a sink, flushing at least every flush_interval.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out, std::chrono::milliseconds flush_interval = std::chrono::seconds(5));

    /// Throws IoError carrying the number of rows written so far.
    void write(const FusedRow& row);
    void flush();
    std::size_t rows() const noexcept { return rows_; }

private:
    void check(const char* what);

    std::ostream& out_;
    std::chrono::milliseconds flush_interval_;
    std::chrono::steady_clock::time_point last_flush_;
    std::size_t rows_ = 0;
};

/// Writes header plus rows; returns the row count.
std::size_t write_csv(std::span<const FusedRow> rows, std::ostream& out);
std::size_t write_csv_file(std::span<const FusedRow> rows, const std::string& path);

/// Throws SchemaError on a header mismatch and ParseError (with the line
/// number) on a bad field or a truncated final line.
std::vector<FusedRow> read_csv(std::istream& in);
std::vector<FusedRow> read_csv_file(const std::string& path);

} // namespace cabin::persist
