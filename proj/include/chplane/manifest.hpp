#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "chplane/csv.hpp"
#include "chplane/error.hpp"

namespace chplane {

struct CorpusRecord {
    std::string id;
    std::filesystem::path path;  // absolute or relative to the working dir, already resolved
    std::string group;
    int year = 0;
    std::vector<std::string> fields;
};

struct YearRange {
    int first;
    int last;
};

/// Load a `id,path,group,year,fields` manifest. Relative paths resolve
/// against the manifest's directory. Errors carry the file line number
/// (header is line 1).
inline std::vector<CorpusRecord> load_manifest(const std::filesystem::path& manifest,
                                               std::optional<YearRange> years = std::nullopt) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open manifest " + manifest.string());
    std::string line;
    if (!std::getline(in, line)) throw ManifestError(1, "missing header row");
    csv::chomp(line);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    const auto header = csv::split(line);
    const std::vector<std::string> expected{"id", "path", "group", "year", "fields"};
    if (header != expected) throw ManifestError(1, "header must be id,path,group,year,fields");

    const auto base = manifest.parent_path();
    std::vector<CorpusRecord> records;
    std::unordered_set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        csv::chomp(line);
        if (line.empty()) continue;
        std::vector<std::string> cols;
        try {
            cols = csv::split(line);
        } catch (const FormatError& e) {
            throw ManifestError(lineno, e.what());
        }
        if (cols.size() != 5) throw ManifestError(lineno, "expected 5 fields, got " + std::to_string(cols.size()));
        CorpusRecord r;
        r.id = cols[0];
        if (r.id.empty()) throw ManifestError(lineno, "empty id");
        if (cols[1].empty()) throw ManifestError(lineno, "empty path");
        std::filesystem::path p(cols[1]);
        r.path = p.is_absolute() ? p : base / p;
        r.group = cols[2];
        const auto year = csv::parse_int(cols[3]);
        if (!year) throw ManifestError(lineno, "year '" + cols[3] + "' is not an integer");
        r.year = static_cast<int>(*year);
        if (years && (r.year < years->first || r.year > years->last))
            throw ManifestError(lineno, "year " + cols[3] + " outside declared range");
        std::size_t start = 0;
        const std::string& f = cols[4];
        while (start <= f.size() && !f.empty()) {
            const auto end = f.find(';', start);
            auto item = f.substr(start, end == std::string::npos ? std::string::npos : end - start);
            if (!item.empty()) r.fields.push_back(std::move(item));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (!seen.insert(r.id).second) throw ManifestError(lineno, "duplicate id '" + r.id + "'");
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace chplane
