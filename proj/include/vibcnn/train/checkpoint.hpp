#pragma once

// Checkpoint file ("VFCK"), little-endian:
//   magic[4] version:u32 header_len:u32 header[header_len]
//   per parameter in stack order (weights then biases): f32 buffer
//   flags:u8   bit 0 = Adam state follows
//   [step:u64, m buffers, v buffers]
//
// The header is UTF-8 `key=value` lines naming the model configuration and
// the layer list, e.g. `layers=conv1:64x1x100,conv2:32x64x50,...`.

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vibcnn/binary_io.hpp"
#include "vibcnn/nn/model.hpp"
#include "vibcnn/train/adam.hpp"

namespace vibcnn::train {

inline constexpr char kCheckpointMagic[4] = {'V', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nn::Model<float> model;
    std::optional<AdamState<float>> optimizer;
    std::vector<std::string> class_names;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string dims_string(const std::vector<std::size_t>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
    return s;
}

/// "conv1.weight" -> "conv1"
inline std::string layer_of(const std::string& param_name) { return param_name.substr(0, param_name.find('.')); }

inline std::string layer_list(const nn::Model<float>& model) {
    std::string s;
    for (const auto& [name, shape] : model.layer_shapes())
        if (name.ends_with(".weight")) s += (s.empty() ? "" : ",") + layer_of(name) + ":" + dims_string(shape);
    return s;
}

inline std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
    return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::ParseError, "checkpoint header lacks '" + key + "'");
    std::size_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::ParseError, "bad value for '" + key + "'");
    return v;
}

inline double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::ParseError, "checkpoint header lacks '" + key + "'");
    double v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::ParseError, "bad value for '" + key + "'");
    return v;
}

} // namespace detail

inline std::string checkpoint_header(const nn::Model<float>& model, const std::vector<std::string>& class_names) {
    const auto& c = model.config();
    std::ostringstream h;
    h << "window_len=" << c.window_len << '\n'
      << "class_count=" << c.class_count << '\n'
      << "dropout_p=" << detail::format_double(c.dropout_p) << '\n'
      << "conv1_filters=" << c.conv1_filters << '\n'
      << "conv1_kernel=" << c.conv1_kernel << '\n'
      << "conv2_filters=" << c.conv2_filters << '\n'
      << "conv2_kernel=" << c.conv2_kernel << '\n'
      << "pool_size=" << c.pool_size << '\n'
      << "pool_stride=" << c.pool_stride << '\n'
      << "dense_hidden=" << c.dense_hidden << '\n'
      << "layers=" << detail::layer_list(model) << '\n';
    if (!class_names.empty()) h << "class_names=" << detail::join(class_names, ',') << '\n';
    return h.str();
}

inline std::vector<std::uint8_t> encode_checkpoint(const nn::Model<float>& model, const AdamState<float>* optimizer,
                                                   const std::vector<std::string>& class_names = {}) {
    const auto header = checkpoint_header(model, class_names);
    io::ByteWriter w;
    w.bytes(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.bytes(header.data(), header.size());
    for (const auto& p : model.parameters())
        for (float v : p.value.values()) w.f32(v);
    w.u8(optimizer ? 1 : 0);
    if (optimizer) {
        w.u64(optimizer->t);
        for (const auto& m : optimizer->m)
            for (float v : m) w.f32(v);
        for (const auto& v : optimizer->v)
            for (float x : v) w.f32(x);
    }
    return std::move(w).take();
}

inline void save_checkpoint(const nn::Model<float>& model, const AdamState<float>* optimizer, const std::filesystem::path& path,
                            const std::vector<std::string>& class_names = {}) {
    io::write_file(path, encode_checkpoint(model, optimizer, class_names));
}

/// Decodes a checkpoint. When `expected` is given, every layer shape must
/// agree with the model that configuration would build.
inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::optional<nn::ModelConfig>& expected = {}) {
    io::ByteReader r(bytes, ErrorCode::TruncatedFile);
    if (!r.magic(kCheckpointMagic)) throw Error(ErrorCode::BadMagic, "not a checkpoint file");
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version));
    const auto header = r.text(r.u32());

    std::map<std::string, std::string> kv;
    for (const auto& line : detail::split(header, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "checkpoint header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    nn::ModelConfig cfg;
    cfg.window_len = detail::to_size(kv, "window_len");
    cfg.class_count = detail::to_size(kv, "class_count");
    cfg.conv1_filters = detail::to_size(kv, "conv1_filters");
    cfg.conv1_kernel = detail::to_size(kv, "conv1_kernel");
    cfg.conv2_filters = detail::to_size(kv, "conv2_filters");
    cfg.conv2_kernel = detail::to_size(kv, "conv2_kernel");
    cfg.pool_size = detail::to_size(kv, "pool_size");
    cfg.pool_stride = detail::to_size(kv, "pool_stride");
    cfg.dense_hidden = detail::to_size(kv, "dense_hidden");
    cfg.dropout_p = detail::to_double(kv, "dropout_p");

    Checkpoint ck{nn::Model<float>(cfg), std::nullopt, {}};
    if (kv.count("layers") && kv.at("layers") != detail::layer_list(ck.model))
        throw Error(ErrorCode::ShapeMismatch, "header layer list '" + kv.at("layers") + "' disagrees with its own configuration");
    if (kv.count("class_names") && !kv.at("class_names").empty()) ck.class_names = detail::split(kv.at("class_names"), ',');

    if (expected) {
        const nn::Model<float> want(*expected);
        const auto have_shapes = ck.model.layer_shapes();
        const auto want_shapes = want.layer_shapes();
        for (std::size_t i = 0; i < have_shapes.size(); ++i)
            if (have_shapes[i].second != want_shapes[i].second)
                throw Error(ErrorCode::ShapeMismatch, "layer " + detail::layer_of(have_shapes[i].first) + " (" + have_shapes[i].first +
                                                          "): checkpoint " + detail::dims_string(have_shapes[i].second) +
                                                          " vs configured " + detail::dims_string(want_shapes[i].second));
        if (expected->window_len != cfg.window_len)
            throw Error(ErrorCode::ShapeMismatch, "input window: checkpoint " + std::to_string(cfg.window_len) + " vs configured " +
                                                      std::to_string(expected->window_len));
    }

    for (auto& p : ck.model.parameters())
        for (auto& v : p.value.values()) v = r.f32();
    const auto flags = r.u8();
    if (flags & 1u) {
        auto state = AdamState<float>::zeros_like(ck.model.parameters());
        state.t = r.u64();
        for (auto& m : state.m)
            for (auto& v : m) v = r.f32();
        for (auto& v : state.v)
            for (auto& x : v) x = r.f32();
        ck.optimizer = std::move(state);
    }
    return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<nn::ModelConfig>& expected = {}) {
    return decode_checkpoint(io::read_file(path), expected);
}

} // namespace vibcnn::train
