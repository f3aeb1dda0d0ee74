#pragma once

#include <fnmatch.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/ingest/mat5.hpp"

namespace vibcnn::ingest {

/// One channel of raw vibration samples.
struct Signal {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;
    std::string source_id;
    std::optional<int> class_label;

    void validate(std::optional<int> class_count = std::nullopt) const {
        if (samples.empty()) throw Error(ErrorCode::InvalidConfig, "signal '" + source_id + "' has no samples");
        if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidConfig, "signal '" + source_id + "' has non-positive sample rate");
        if (class_label && class_count && (*class_label < 0 || *class_label >= *class_count))
            throw Error(ErrorCode::LabelOutOfRange, "signal '" + source_id + "' label " + std::to_string(*class_label));
    }
};

inline bool glob_match(const std::string& pattern, const std::string& text) {
    return ::fnmatch(pattern.c_str(), text.c_str(), 0) == 0;
}

/// Picks the single variable whose name matches `channel_pattern` and
/// flattens it to a sample sequence in storage order.
inline Signal signal_from_mat(const MatFile& file, const std::string& channel_pattern, double sample_rate_hz,
                              std::string source_id = {}) {
    std::vector<std::string> matches;
    for (const auto& [name, array] : file.arrays)
        if (glob_match(channel_pattern, name)) matches.push_back(name);
    if (matches.empty()) throw Error(ErrorCode::NoChannelMatch, "no variable matches '" + channel_pattern + "'");
    if (matches.size() > 1) {
        std::string list;
        for (const auto& m : matches) list += (list.empty() ? "" : ", ") + m;
        throw Error(ErrorCode::AmbiguousChannel, "pattern '" + channel_pattern + "' matches " + list);
    }
    Signal s;
    s.samples = file.arrays.at(matches.front()).values;
    s.sample_rate_hz = sample_rate_hz;
    s.source_id = source_id.empty() ? matches.front() : std::move(source_id);
    s.validate();
    return s;
}

inline Signal load_record(std::span<const std::uint8_t> bytes, const std::string& channel_pattern, double sample_rate_hz,
                          std::string source_id = {}) {
    return signal_from_mat(parse_mat5(bytes), channel_pattern, sample_rate_hz, std::move(source_id));
}

inline Signal load_record(const std::filesystem::path& path, const std::string& channel_pattern, double sample_rate_hz) {
    return load_record(read_file_bytes(path), channel_pattern, sample_rate_hz, path.filename().string());
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace detail

/// One value per line; a leading non-numeric line is treated as a header.
inline Signal parse_csv(std::istream& in, double sample_rate_hz, std::string source_id) {
    Signal s;
    s.sample_rate_hz = sample_rate_hz;
    s.source_id = std::move(source_id);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto value = detail::parse_double(text);
        if (!value) {
            if (line_no == 1) continue;
            throw Error(ErrorCode::ParseError, s.source_id + " line " + std::to_string(line_no) + ": '" + std::string(text) + "'");
        }
        s.samples.push_back(*value);
    }
    if (s.samples.empty()) throw Error(ErrorCode::EmptyFile, s.source_id + " contains no samples");
    return s;
}

inline Signal load_csv(const std::filesystem::path& path, double sample_rate_hz = 1.0) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_csv(in, sample_rate_hz, path.filename().string());
}

struct ManifestEntry {
    std::string record_name;
    std::filesystem::path file_path;
};

/// Reads `record_name<TAB>file_path` lines; relative paths resolve against
/// the manifest's directory. Blank lines and `#` comments are ignored.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto tab = text.find('\t');
        if (tab == std::string_view::npos)
            throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": expected record<TAB>path");
        ManifestEntry e;
        e.record_name = std::string(detail::trim(text.substr(0, tab)));
        e.file_path = std::string(detail::trim(text.substr(tab + 1)));
        if (e.file_path.is_relative()) e.file_path = path.parent_path() / e.file_path;
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace vibcnn::ingest
