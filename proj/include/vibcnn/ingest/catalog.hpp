#pragma once

#include <set>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/ingest/signal.hpp"

namespace vibcnn::ingest {

struct CatalogEntry {
    std::string pattern;         // glob matched against record names
    std::string fault_location;
    std::string detail;          // fault depth (inch) or operating code
    int class_index = 0;
};

struct Catalog {
    std::string name;
    std::vector<CatalogEntry> entries;
    int class_count = 0;

    /// Display name per class: the first pattern registered for it.
    std::vector<std::string> class_names() const {
        std::vector<std::string> names(static_cast<std::size_t>(class_count));
        for (const auto& e : entries)
            if (names[static_cast<std::size_t>(e.class_index)].empty()) names[static_cast<std::size_t>(e.class_index)] = e.pattern;
        return names;
    }

    void validate() const {
        std::vector<int> seen(static_cast<std::size_t>(class_count), 0);
        std::set<std::string> patterns;
        for (const auto& e : entries) {
            if (e.class_index < 0 || e.class_index >= class_count)
                throw Error(ErrorCode::InvalidConfig, "catalog entry '" + e.pattern + "' has class index out of range");
            if (!patterns.insert(e.pattern).second)
                throw Error(ErrorCode::InvalidConfig, "catalog pattern '" + e.pattern + "' listed twice");
            ++seen[static_cast<std::size_t>(e.class_index)];
        }
        for (std::size_t c = 0; c < seen.size(); ++c)
            if (seen[c] == 0) throw Error(ErrorCode::InvalidConfig, "catalog class " + std::to_string(c) + " has no entry");
    }
};

/// 14 CWRU classes; index k corresponds to the table's "Class k+1".
inline Catalog catalog_cwru() {
    Catalog c{"cwru", {}, 14};
    const struct { const char* name; const char* location; const char* depth; } rows[] = {
        {"14_BA", "Ball", "0.014"},       {"14_IR", "Inner Race", "0.014"}, {"14_OR1", "Outer Race", "0.014"},
        {"21_BA", "Ball", "0.021"},       {"21_IR", "Inner Race", "0.021"}, {"21_OR1", "Outer Race", "0.021"},
        {"21_OR2", "Outer Race", "0.021"}, {"21_OR3", "Outer Race", "0.021"}, {"7_BA", "Ball", "0.007"},
        {"7_IR", "Inner Race", "0.007"},  {"7_OR1", "Outer Race", "0.007"}, {"7_OR2", "Outer Race", "0.007"},
        {"7_OR3", "Outer Race", "0.007"}, {"N", "Healthy", "-"},
    };
    int k = 0;
    for (const auto& r : rows) c.entries.push_back({r.name, r.location, r.depth, k++});
    return c;
}

/// 16 PU classes: {healthy, outer, outer+inner, inner} under four operating codes.
inline Catalog catalog_pu() {
    Catalog c{"pu", {}, 16};
    const char* codes[] = {"N09_M07_F10", "N15_M01_F10", "N15_M07_F04", "N15_M07_F10"};
    const struct { const char* bearing; const char* location; } kinds[] = {
        {"K001", "Healthy"}, {"KA01", "Outer Race"}, {"KB23", "Outer Race + Inner Race"}, {"KI01", "Inner Race"},
    };
    int k = 0;
    for (const char* code : codes)
        for (const auto& kind : kinds)
            c.entries.push_back({std::string(code) + "_" + kind.bearing + "_1", kind.location, code, k++});
    return c;
}

/// Labels for the synthetic generator's four fault kinds.
inline Catalog catalog_synthetic() {
    return Catalog{"synthetic",
                   {{"healthy", "Healthy", "-", 0}, {"inner", "Inner Race", "-", 1},
                    {"outer", "Outer Race", "-", 2}, {"ball", "Ball", "-", 3}},
                   4};
}

inline int label_record(const Catalog& catalog, const std::string& record_name) {
    const CatalogEntry* hit = nullptr;
    for (const auto& e : catalog.entries) {
        if (!glob_match(e.pattern, record_name)) continue;
        if (hit && hit->class_index != e.class_index)
            throw Error(ErrorCode::AmbiguousRecord, "'" + record_name + "' matches '" + hit->pattern + "' and '" + e.pattern + "'");
        hit = &e;
    }
    if (!hit) throw Error(ErrorCode::UnknownRecord, "'" + record_name + "' is not in the " + catalog.name + " catalog");
    return hit->class_index;
}

} // namespace vibcnn::ingest
