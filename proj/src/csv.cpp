#include "chickcall/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chickcall/errors.hpp"

namespace chickcall::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& context) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw IoError("unterminated quote in " + context);
    fields.push_back(std::move(cur));
    return fields;
}

std::string quote_field(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::optional<std::size_t> Table::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(std::distance(header.begin(), it));
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path.string());
    Table table;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_line(line, path.string() + ":" + std::to_string(line_no));
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size())
                throw IoError("row width mismatch at " + path.string() + ":" +
                              std::to_string(line_no));
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw IoError("empty CSV: " + path.string());
    return table;
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
    if (!out) throw IoError("cannot write CSV: " + path.string());
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << quote_field(fields[i]);
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    if (!out) throw IoError("short write: " + path.string());
}

void require_columns(const Table& table, const std::vector<std::string>& expected,
                     const std::string& what) {
    for (const auto& name : expected)
        if (!table.column(name))
            throw IoError(what + ": missing required column '" + name + "'");
}

std::string format_time(double seconds) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", seconds);
    return buf;
}

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string format_value(const std::optional<double>& v) {
    return v ? format_value(*v) : std::string();
}

double parse_double(const std::string& field, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad numeric field '" + field + "' in " + context);
    }
}

std::optional<double> parse_optional(const std::string& field, const std::string& context) {
    if (field.empty()) return std::nullopt;
    return parse_double(field, context);
}

}  // namespace chickcall::csv
