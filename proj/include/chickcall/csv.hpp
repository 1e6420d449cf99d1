#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace chickcall::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(const std::string& name) const;
};

/// RFC-4180-ish reader: quoted fields, escaped quotes, CRLF tolerant.
Table read(const std::filesystem::path& path);

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

/// Throws IoError naming the file and the missing column.
void require_columns(const Table& table, const std::vector<std::string>& expected,
                     const std::string& what);

/// Seconds with 6 decimals, C locale.
std::string format_time(double seconds);

/// Round-trippable general value formatting (%.12g), empty for nulls.
std::string format_value(double v);
std::string format_value(const std::optional<double>& v);

double parse_double(const std::string& field, const std::string& context);
std::optional<double> parse_optional(const std::string& field, const std::string& context);

}  // namespace chickcall::csv
