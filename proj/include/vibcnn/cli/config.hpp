#pragma once

// Run configuration: a flat `key = value` text file with dotted keys.
// Lines starting with '#' are comments. Unknown keys are rejected.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/ingest/catalog.hpp"
#include "vibcnn/ingest/signal.hpp"
#include "vibcnn/nn/model.hpp"
#include "vibcnn/pipeline/segment.hpp"
#include "vibcnn/train/fit.hpp"
#include "vibcnn/tsne/tsne.hpp"

namespace vibcnn::cli {

enum class DatasetKind { cwru, pu, synthetic, csv_manifest };

inline const char* to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::cwru: return "cwru";
    case DatasetKind::pu: return "pu";
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::csv_manifest: return "csv-manifest";
    }
    return "?";
}

struct SyntheticParams {
    std::size_t windows_per_class = 200;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

struct AblationCell {
    std::size_t window_len = 0;
    std::size_t stride = 0;
    bool early_stop = false;
    bool operator==(const AblationCell&) const = default;
};

struct RunConfig {
    DatasetKind dataset = DatasetKind::synthetic;
    std::filesystem::path manifest;
    std::string catalog;  // empty: the catalog named by `dataset`
    std::string channel_pattern = "*_DE_time";
    double sample_rate_hz = 12000.0;
    std::size_t window_len = 500;
    std::size_t stride = 300;
    bool normalize = true;
    pipeline::SplitSpec split;
    nn::ModelConfig model;  // window_len and class_count are filled from the fields above
    train::TrainConfig train;
    tsne::TsneConfig tsne;
    SyntheticParams synthetic;
    std::filesystem::path output_dir = "vibcnn_out";
    std::vector<AblationCell> ablate_grid;

    void set(const std::string& key, std::string_view value);
    std::vector<std::pair<std::string, std::string>> entries() const;

    /// Sets every seed in the configuration.
    void set_seed(std::uint64_t seed) {
        split.seed = seed;
        train.seed = seed;
        tsne.seed = seed;
        synthetic.seed = seed;
    }

    ingest::Catalog catalog_for() const {
        std::string name = catalog;
        if (name.empty()) name = dataset == DatasetKind::pu ? "pu" : dataset == DatasetKind::synthetic ? "synthetic" : "cwru";
        if (name == "cwru") return ingest::catalog_cwru();
        if (name == "pu") return ingest::catalog_pu();
        if (name == "synthetic") return ingest::catalog_synthetic();
        throw Error(ErrorCode::InvalidConfig, "unknown catalog '" + name + "'");
    }

    nn::ModelConfig model_config() const {
        auto m = model;
        m.window_len = window_len;
        m.class_count = static_cast<std::size_t>(catalog_for().class_count);
        return m;
    }

    void validate() const {
        if (window_len == 0) throw Error(ErrorCode::InvalidConfig, "window_len must be >= 1");
        if (stride == 0) throw Error(ErrorCode::InvalidConfig, "stride must be >= 1");
        if (!(sample_rate_hz > 0)) throw Error(ErrorCode::InvalidConfig, "sample_rate_hz must be > 0");
        if (dataset == DatasetKind::synthetic && catalog_for().class_count != 4)
            throw Error(ErrorCode::InvalidConfig, "the synthetic dataset uses the synthetic catalog");
        if (dataset != DatasetKind::synthetic) {
            if (manifest.empty()) throw Error(ErrorCode::InvalidConfig, "dataset '" + std::string(to_string(dataset)) + "' needs a manifest");
            if (!std::filesystem::exists(manifest)) throw Error(ErrorCode::InvalidConfig, "manifest not found: " + manifest.string());
        }
        if (!(split.train_fraction > 0 && split.train_fraction < 1)) throw Error(ErrorCode::InvalidConfig, "split.train_fraction must lie in (0, 1)");
        model_config().validate();
        train.validate();
    }

    std::string echo() const {
        std::string s;
        for (const auto& [k, v] : entries()) s += k + " = " + v + "\n";
        return s;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) { return ingest::detail::trim(s); }

[[noreturn]] inline void bad_value(std::string_view key, std::string_view value, std::string_view want) {
    throw Error(ErrorCode::InvalidConfig, "'" + std::string(key) + "': '" + std::string(value) + "' is not " + std::string(want));
}

inline void parse_into(std::size_t& out, std::string_view key, std::string_view v) {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
}
inline void parse_into(double& out, std::string_view key, std::string_view v) {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a number");
}
inline void parse_into(bool& out, std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") out = true;
    else if (v == "false" || v == "0" || v == "no" || v == "off") out = false;
    else bad_value(key, v, "a boolean");
}
inline void parse_into(std::string& out, std::string_view, std::string_view v) { out = std::string(v); }
inline void parse_into(std::filesystem::path& out, std::string_view, std::string_view v) { out = std::string(v); }

inline std::string format_value(std::size_t v) { return std::to_string(v); }
inline std::string format_value(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(const std::filesystem::path& v) { return v.string(); }

inline std::vector<AblationCell> parse_grid(std::string_view v) {
    std::vector<AblationCell> grid;
    std::string text(v);
    std::stringstream cells(text);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
        const auto c = trim(cell);
        if (c.empty()) continue;
        const auto a = c.find('/');
        const auto b = a == std::string_view::npos ? a : c.find('/', a + 1);
        if (b == std::string_view::npos) bad_value("ablate.grid", c, "window/stride/early_stop");
        AblationCell g;
        parse_into(g.window_len, "ablate.grid", trim(c.substr(0, a)));
        parse_into(g.stride, "ablate.grid", trim(c.substr(a + 1, b - a - 1)));
        parse_into(g.early_stop, "ablate.grid", trim(c.substr(b + 1)));
        grid.push_back(g);
    }
    return grid;
}

inline std::string format_grid(const std::vector<AblationCell>& grid) {
    std::string s;
    for (const auto& g : grid)
        s += (s.empty() ? "" : ", ") + std::to_string(g.window_len) + "/" + std::to_string(g.stride) + "/" + (g.early_stop ? "1" : "0");
    return s;
}

struct Field {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename Ref>
Field field(std::string key, Ref ref) {
    return {[key, ref](RunConfig& c, std::string_view v) { parse_into(ref(c), key, v); },
            [ref](const RunConfig& c) { return format_value(ref(const_cast<RunConfig&>(c))); }};
}

// Ordered so that entries() echoes keys in a readable order.
inline const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add = [&t](std::string key, auto ref) { t.emplace_back(key, field(key, ref)); };
        t.emplace_back("dataset", Field{[](RunConfig& c, std::string_view v) {
                                            if (v == "cwru") c.dataset = DatasetKind::cwru;
                                            else if (v == "pu") c.dataset = DatasetKind::pu;
                                            else if (v == "synthetic") c.dataset = DatasetKind::synthetic;
                                            else if (v == "csv-manifest") c.dataset = DatasetKind::csv_manifest;
                                            else bad_value("dataset", v, "one of cwru, pu, synthetic, csv-manifest");
                                        },
                                        [](const RunConfig& c) { return std::string(to_string(c.dataset)); }});
        add("manifest", [](RunConfig& c) -> auto& { return c.manifest; });
        add("catalog", [](RunConfig& c) -> auto& { return c.catalog; });
        add("channel_pattern", [](RunConfig& c) -> auto& { return c.channel_pattern; });
        add("sample_rate_hz", [](RunConfig& c) -> auto& { return c.sample_rate_hz; });
        add("window_len", [](RunConfig& c) -> auto& { return c.window_len; });
        add("stride", [](RunConfig& c) -> auto& { return c.stride; });
        add("normalize", [](RunConfig& c) -> auto& { return c.normalize; });
        add("output_dir", [](RunConfig& c) -> auto& { return c.output_dir; });

        add("split.train_fraction", [](RunConfig& c) -> auto& { return c.split.train_fraction; });
        t.emplace_back("split.mode", Field{[](RunConfig& c, std::string_view v) {
                                               if (v == "random_stratified") c.split.mode = pipeline::SplitMode::random_stratified;
                                               else if (v == "block_per_record") c.split.mode = pipeline::SplitMode::block_per_record;
                                               else bad_value("split.mode", v, "random_stratified or block_per_record");
                                           },
                                           [](const RunConfig& c) {
                                               return std::string(c.split.mode == pipeline::SplitMode::random_stratified ? "random_stratified"
                                                                                                                         : "block_per_record");
                                           }});
        add("split.seed", [](RunConfig& c) -> auto& { return c.split.seed; });

        add("model.conv1_filters", [](RunConfig& c) -> auto& { return c.model.conv1_filters; });
        add("model.conv1_kernel", [](RunConfig& c) -> auto& { return c.model.conv1_kernel; });
        add("model.conv2_filters", [](RunConfig& c) -> auto& { return c.model.conv2_filters; });
        add("model.conv2_kernel", [](RunConfig& c) -> auto& { return c.model.conv2_kernel; });
        add("model.pool_size", [](RunConfig& c) -> auto& { return c.model.pool_size; });
        add("model.pool_stride", [](RunConfig& c) -> auto& { return c.model.pool_stride; });
        add("model.dense_hidden", [](RunConfig& c) -> auto& { return c.model.dense_hidden; });
        add("model.dropout_p", [](RunConfig& c) -> auto& { return c.model.dropout_p; });

        add("train.max_epochs", [](RunConfig& c) -> auto& { return c.train.max_epochs; });
        add("train.batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
        add("train.learning_rate", [](RunConfig& c) -> auto& { return c.train.adam.learning_rate; });
        add("train.beta1", [](RunConfig& c) -> auto& { return c.train.adam.beta1; });
        add("train.beta2", [](RunConfig& c) -> auto& { return c.train.adam.beta2; });
        add("train.epsilon", [](RunConfig& c) -> auto& { return c.train.adam.epsilon; });
        add("train.early_stop", [](RunConfig& c) -> auto& { return c.train.early_stop.enabled; });
        add("train.patience", [](RunConfig& c) -> auto& { return c.train.early_stop.patience; });
        add("train.val_fraction", [](RunConfig& c) -> auto& { return c.train.early_stop.val_fraction; });
        add("train.seed", [](RunConfig& c) -> auto& { return c.train.seed; });

        add("tsne.perplexity", [](RunConfig& c) -> auto& { return c.tsne.perplexity; });
        add("tsne.iterations", [](RunConfig& c) -> auto& { return c.tsne.iterations; });
        add("tsne.learning_rate", [](RunConfig& c) -> auto& { return c.tsne.learning_rate; });
        add("tsne.early_exaggeration", [](RunConfig& c) -> auto& { return c.tsne.early_exaggeration; });
        add("tsne.exaggeration_iters", [](RunConfig& c) -> auto& { return c.tsne.exaggeration_iters; });
        add("tsne.max_points", [](RunConfig& c) -> auto& { return c.tsne.max_points; });
        add("tsne.seed", [](RunConfig& c) -> auto& { return c.tsne.seed; });

        add("synthetic.windows_per_class", [](RunConfig& c) -> auto& { return c.synthetic.windows_per_class; });
        add("synthetic.noise_std", [](RunConfig& c) -> auto& { return c.synthetic.noise_std; });
        add("synthetic.seed", [](RunConfig& c) -> auto& { return c.synthetic.seed; });

        t.emplace_back("ablate.grid", Field{[](RunConfig& c, std::string_view v) { c.ablate_grid = parse_grid(v); },
                                            [](const RunConfig& c) { return format_grid(c.ablate_grid); }});
        return t;
    }();
    return table;
}

} // namespace detail

inline void RunConfig::set(const std::string& key, std::string_view value) {
    if (key == "seed") {
        std::size_t s = 0;
        detail::parse_into(s, key, value);
        set_seed(s);
        return;
    }
    for (const auto& [name, f] : detail::fields())
        if (name == key) return f.set(*this, value);
    throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

inline std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, f] : detail::fields()) out.emplace_back(name, f.get(*this));
    return out;
}

/// Parses `key = value` lines on top of the defaults. Relative `manifest`
/// paths resolve against `base_dir`.
inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>", const std::filesystem::path& base_dir = {}) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::InvalidConfig, source + " line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(detail::trim(text.substr(0, eq)));
        try {
            cfg.set(key, detail::trim(text.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, source + " line " + std::to_string(line_no) + ": " + e.detail());
        }
    }
    if (!cfg.manifest.empty() && cfg.manifest.is_relative() && !base_dir.empty()) cfg.manifest = base_dir / cfg.manifest;
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    return parse_config(in, path.string(), path.parent_path());
}

} // namespace vibcnn::cli
