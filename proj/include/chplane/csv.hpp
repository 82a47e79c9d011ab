#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "chplane/error.hpp"

namespace chplane::csv {

/// Split one CSV record. Supports double-quoted fields with "" escapes;
/// records never span lines.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw FormatError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

/// Shortest round-trip decimal form; NaN is written as NA.
inline std::string format(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format(std::optional<double> v) { return v ? format(*v) : std::string("NA"); }

inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty() || s == "NA") return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Strip a trailing '\r' left by CRLF files.
inline void chomp(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// A whole CSV file: header plus rows keyed by column name.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError("missing CSV column '" + std::string(name) + "'");
    }
    [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
    chomp(line);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        chomp(line);
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != t.header.size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields");
        t.rows.push_back(std::move(fields));
    }
    return t;
}

/// Buffered writer; rows are joined with ',' and terminated with '\n'.
class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) throw IoError("cannot create " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << escape(fields[i]);
        }
        out_ << '\n';
        if (!out_) throw IoError("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace chplane::csv
