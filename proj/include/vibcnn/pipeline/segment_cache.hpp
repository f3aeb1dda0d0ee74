#pragma once

// Binary segment cache ("VFSG"), little-endian:
//   magic[4] version:u32 N:u64 W:u64 C:u32
//   N*W f32 (row-major) | N u32 labels | N u32 record ids

#include <filesystem>
#include <fstream>
#include <string>

#include "vibcnn/binary_io.hpp"
#include "vibcnn/pipeline/segment.hpp"

namespace vibcnn::pipeline {

inline constexpr char kSegmentMagic[4] = {'V', 'F', 'S', 'G'};
inline constexpr std::uint32_t kSegmentVersion = 1;

inline std::vector<std::uint8_t> encode_segment_cache(const SegmentSet& set) {
    set.validate();
    io::ByteWriter w;
    w.bytes(kSegmentMagic, 4);
    w.u32(kSegmentVersion);
    w.u64(set.size());
    w.u64(set.window_len);
    w.u32(set.class_count);
    for (float v : set.data) w.f32(v);
    for (auto l : set.labels) w.u32(l);
    for (auto r : set.record_ids) w.u32(r);
    return std::move(w).take();
}

inline SegmentSet decode_segment_cache(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, ErrorCode::Truncated);
    if (!r.magic(kSegmentMagic)) throw Error(ErrorCode::BadMagic, "not a segment cache");
    const auto version = r.u32();
    if (version != kSegmentVersion) throw Error(ErrorCode::VersionUnsupported, "segment cache version " + std::to_string(version));
    SegmentSet set;
    const auto n = r.u64();
    set.window_len = r.u64();
    set.class_count = r.u32();
    if (set.window_len != 0 && n > bytes.size() / (set.window_len * 4 + 8))
        throw Error(ErrorCode::Truncated, "segment cache too short for " + std::to_string(n) + " rows");
    set.data.resize(n * set.window_len);
    for (auto& v : set.data) v = r.f32();
    set.labels.resize(n);
    for (auto& l : set.labels) l = r.u32();
    set.record_ids.resize(n);
    for (auto& id : set.record_ids) id = r.u32();
    set.validate();
    return set;
}

inline void save_segment_cache(const SegmentSet& set, const std::filesystem::path& path) {
    io::write_file(path, encode_segment_cache(set));
}

inline SegmentSet load_segment_cache(const std::filesystem::path& path) { return decode_segment_cache(io::read_file(path)); }

} // namespace vibcnn::pipeline
