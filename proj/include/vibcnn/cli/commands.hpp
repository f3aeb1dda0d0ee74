#pragma once

// The command implementations behind the `vibcnn` executable. Each command
// reads its inputs from the run's output directory, writes its artifacts
// there, prints a short summary to `out` and throws vibcnn::Error on failure.
// run_command() turns those errors into process exit codes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vibcnn/cli/config.hpp"
#include "vibcnn/eval/metrics.hpp"
#include "vibcnn/ingest/catalog.hpp"
#include "vibcnn/ingest/signal.hpp"
#include "vibcnn/ingest/synth.hpp"
#include "vibcnn/pipeline/segment.hpp"
#include "vibcnn/pipeline/segment_cache.hpp"
#include "vibcnn/train/checkpoint.hpp"
#include "vibcnn/train/fit.hpp"
#include "vibcnn/tsne/tsne.hpp"

namespace vibcnn::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumeric = 4, kExitShape = 5 };

inline int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::ZeroStride:
        return kExitConfig;
    case ErrorCode::NonFiniteActivation:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteLoss:
        return kExitNumeric;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::ShapeUnderflow:
    case ErrorCode::KernelTooLong:
    case ErrorCode::PoolTooLong:
        return kExitShape;
    default:
        return kExitData;
    }
}

/// Runs `body`, reporting any error on `err`; returns the process exit code.
inline int run_command(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

inline fs::path artifact(const RunConfig& cfg, const char* name) { return cfg.output_dir / name; }

inline std::uint64_t init_seed(const RunConfig& cfg) { return derive_seed(cfg.train.seed, {0x1417u}); }

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f << text;
}

// ---------------------------------------------------------------- ingest

/// Labeled signals for the configured dataset. The synthetic generator sizes
/// its records from `window` and `stride`.
inline std::vector<ingest::Signal> load_signals(const RunConfig& cfg, std::size_t window, std::size_t stride) {
    if (cfg.dataset == DatasetKind::synthetic) {
        ingest::SyntheticDatasetConfig d;
        d.windows_per_class = cfg.synthetic.windows_per_class;
        d.window_len = window;
        d.stride = stride;
        d.sample_rate_hz = cfg.sample_rate_hz;
        d.noise_std = cfg.synthetic.noise_std;
        d.seed = cfg.synthetic.seed;
        return ingest::synthetic_dataset(d);
    }
    const auto catalog = cfg.catalog_for();
    std::vector<ingest::Signal> signals;
    for (const auto& entry : ingest::read_manifest(cfg.manifest)) {
        try {
            const int label = ingest::label_record(catalog, entry.record_name);
            auto sig = cfg.dataset == DatasetKind::csv_manifest ? ingest::load_csv(entry.file_path, cfg.sample_rate_hz)
                                                                : ingest::load_record(entry.file_path, cfg.channel_pattern, cfg.sample_rate_hz);
            sig.source_id = entry.record_name;
            sig.class_label = label;
            signals.push_back(std::move(sig));
        } catch (const Error& e) {
            throw Error(e.code(), "record '" + entry.record_name + "' (" + entry.file_path.string() + "): " + e.detail());
        }
    }
    if (signals.empty()) throw Error(ErrorCode::EmptyDataset, "manifest " + cfg.manifest.string() + " lists no records");
    return signals;
}

struct Dataset {
    pipeline::SegmentSet train;
    pipeline::SegmentSet test;
};

inline Dataset prepare_dataset(const RunConfig& cfg, std::size_t window, std::size_t stride) {
    const auto signals = load_signals(cfg, window, stride);
    const auto classes = static_cast<std::uint32_t>(cfg.catalog_for().class_count);
    const auto all = pipeline::build_segment_set(signals, window, stride, classes, cfg.normalize);
    auto [train, test] = pipeline::split(all, cfg.split);
    return {std::move(train), std::move(test)};
}

inline std::string ingest_summary(const RunConfig& cfg, const Dataset& d) {
    const auto names = cfg.catalog_for().class_names();
    const auto tr = d.train.class_counts();
    const auto te = d.test.class_counts();
    std::ostringstream s;
    s << "dataset = " << to_string(cfg.dataset) << '\n'
      << "window_len = " << d.train.window_len << '\n'
      << "stride = " << d.train.stride << '\n'
      << "classes = " << names.size() << '\n'
      << "segments = " << d.train.size() + d.test.size() << " (train " << d.train.size() << ", test " << d.test.size() << ")\n";
    for (std::size_t c = 0; c < names.size(); ++c) {
        const auto a = c < tr.size() ? tr[c] : 0, b = c < te.size() ? te[c] : 0;
        s << "class " << names[c] << " = " << a + b << " (train " << a << ", test " << b << ")\n";
    }
    return s.str();
}

inline Dataset cmd_ingest(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    auto d = prepare_dataset(cfg, cfg.window_len, cfg.stride);
    fs::create_directories(cfg.output_dir);
    pipeline::save_segment_cache(d.train, artifact(cfg, "train.vfsg"));
    pipeline::save_segment_cache(d.test, artifact(cfg, "test.vfsg"));
    const auto summary = ingest_summary(cfg, d);
    write_text(artifact(cfg, "ingest_summary.txt"), summary);
    out << summary;
    return d;
}

// ---------------------------------------------------------------- train

struct TrainOutcome {
    nn::Model<float> model;
    train::FitResult<float> fit;
    double wall_seconds = 0;
};

inline TrainOutcome train_model(const RunConfig& cfg, const nn::ModelConfig& mc, const pipeline::SegmentSet& train_set,
                                const train::FitHooks& hooks = {}) {
    nn::Model<float> model(mc);
    model.init_params(init_seed(cfg));
    const auto start = std::chrono::steady_clock::now();
    auto result = train::fit(model, train_set, cfg.train, hooks);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(model), std::move(result), secs};
}

struct TrainOptions {
    std::optional<fs::path> train_cache;
    std::optional<fs::path> checkpoint;
};

inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out, const TrainOptions& opt = {}) {
    cfg.validate();
    const auto set = pipeline::load_segment_cache(opt.train_cache.value_or(artifact(cfg, "train.vfsg")));
    const auto mc = cfg.model_config();
    if (set.window_len != mc.window_len)
        throw Error(ErrorCode::ShapeMismatch, "cached segments have length " + std::to_string(set.window_len) + ", config window_len is " +
                                                  std::to_string(mc.window_len));
    train::FitHooks hooks;
    hooks.on_epoch = [&out](const train::EpochRecord& r) {
        out << "epoch " << r.epoch << " train_loss " << r.train_loss << " train_acc " << r.train_acc;
        if (!std::isnan(r.val_loss)) out << " val_loss " << r.val_loss << " val_acc " << r.val_acc;
        out << '\n';
    };
    auto t = train_model(cfg, mc, set, hooks);

    fs::create_directories(cfg.output_dir);
    const auto names = cfg.catalog_for().class_names();
    train::save_checkpoint(t.model, &t.fit.optimizer, opt.checkpoint.value_or(artifact(cfg, "model.vfck")), names);
    std::ostringstream hist;
    t.fit.history.write_csv(hist);
    write_text(artifact(cfg, "history.csv"), hist.str());

    const auto& h = t.fit.history;
    std::ostringstream rep;
    rep << "parameter_count = " << mc.parameter_count() << '\n'
        << "flatten_dim = " << mc.flatten_dim() << '\n'
        << "train_segments = " << set.size() << '\n'
        << "epochs_run = " << h.epochs.size() << '\n'
        << "best_epoch = " << h.best_epoch << '\n'
        << "stopped_early = " << (h.stopped_early ? "true" : "false") << '\n'
        << "wall_seconds = " << t.wall_seconds << '\n'
        << "\n# configuration\n"
        << cfg.echo();
    write_text(artifact(cfg, "train_report.txt"), rep.str());
    out << "parameters " << mc.parameter_count() << ", epochs " << h.epochs.size() << ", best epoch " << h.best_epoch << ", "
        << t.wall_seconds << " s\n";
    return t;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::optional<fs::path> checkpoint;
    std::optional<fs::path> test_cache;
    bool record_vote = false;
};

struct EvalOutcome {
    eval::Evaluation segments;
    std::optional<eval::Evaluation> records;
};

inline std::vector<std::string> names_for(const train::Checkpoint& ck) {
    return ck.class_names.size() == ck.model.config().class_count ? ck.class_names
                                                                   : eval::default_class_names(ck.model.config().class_count);
}

inline eval::Evaluation evaluate_model(const nn::Model<float>& model, const pipeline::SegmentSet& test, std::vector<std::string> names) {
    const auto pred = eval::predict(model, test);
    return eval::confusion(test.labels, pred, model.config().class_count, std::move(names));
}

inline EvalOutcome cmd_eval(const RunConfig& cfg, std::ostream& out, const EvalOptions& opt = {}) {
    const auto ck = train::load_checkpoint(opt.checkpoint.value_or(artifact(cfg, "model.vfck")), cfg.model_config());
    const auto test = pipeline::load_segment_cache(opt.test_cache.value_or(artifact(cfg, "test.vfsg")));
    const auto names = names_for(ck);

    EvalOutcome res{evaluate_model(ck.model, test, names), std::nullopt};
    std::ostringstream rep, csv;
    res.segments.metrics.write_report(rep, names);
    res.segments.confusion.write_csv(csv);
    if (opt.record_vote) {
        res.records = eval::record_vote(test, eval::predict(ck.model, test), ck.model.config().class_count, names);
        rep << "\n# record vote\n";
        res.records->metrics.write_report(rep, names);
    }
    fs::create_directories(cfg.output_dir);
    write_text(artifact(cfg, "metrics.txt"), rep.str());
    write_text(artifact(cfg, "confusion.csv"), csv.str());
    out << "accuracy " << res.segments.metrics.overall_accuracy << " (" << res.segments.confusion.trace() << "/"
        << res.segments.confusion.total() << ")\n";
    if (res.records) out << "record-vote accuracy " << res.records->metrics.overall_accuracy << '\n';
    return res;
}

// ---------------------------------------------------------------- embed

struct EmbedOptions {
    std::optional<fs::path> checkpoint;
    std::optional<fs::path> cache;
    bool untrained = false;  // features from a freshly initialized model
};

struct EmbedOutcome {
    std::vector<std::size_t> indices;  // segment index per embedded row
    std::vector<std::uint32_t> labels;
    tsne::TsneResult embedding;
    double silhouette = 0;           // of the 2-D embedding
    double feature_silhouette = 0;   // of the hidden features themselves
};

inline EmbedOutcome cmd_embed(const RunConfig& cfg, std::ostream& out, const EmbedOptions& opt = {}) {
    const auto set = pipeline::load_segment_cache(opt.cache.value_or(artifact(cfg, "test.vfsg")));
    std::optional<train::Checkpoint> ck;
    std::vector<std::string> names;
    if (opt.untrained) {
        ck.emplace(train::Checkpoint{nn::Model<float>(cfg.model_config()), std::nullopt, {}});
        ck->model.init_params(init_seed(cfg));
        names = cfg.catalog_for().class_names();
    } else {
        ck = train::load_checkpoint(opt.checkpoint.value_or(artifact(cfg, "model.vfck")), cfg.model_config());
        names = names_for(*ck);
    }

    EmbedOutcome res;
    res.indices = tsne::stratified_subsample(set.labels, cfg.tsne.max_points, cfg.tsne.seed);
    const auto sub = set.subset(res.indices);
    res.labels = sub.labels;
    const auto feats = eval::extract_features(ck->model, sub);
    const std::size_t dim = ck->model.config().dense_hidden;
    std::vector<double> x(feats.values().begin(), feats.values().end());

    res.embedding = tsne::tsne(x, sub.size(), dim, cfg.tsne);
    std::size_t skipped = 0;
    res.silhouette = tsne::silhouette(res.embedding.y, sub.size(), 2, res.labels, &skipped);
    res.feature_silhouette = tsne::silhouette(x, sub.size(), dim, res.labels);

    std::ostringstream emb, kl, rep;
    emb << "segment_index,class_name,x,y\n";
    emb.precision(9);
    for (std::size_t i = 0; i < sub.size(); ++i)
        emb << res.indices[i] << ',' << names[res.labels[i]] << ',' << res.embedding.y[2 * i] << ',' << res.embedding.y[2 * i + 1] << '\n';
    kl << "iteration,kl\n";
    kl.precision(9);
    for (std::size_t i = 0; i < res.embedding.kl_trace.size(); ++i) kl << i + 1 << ',' << res.embedding.kl_trace[i] << '\n';
    rep.precision(6);
    rep << "model = " << (opt.untrained ? "untrained" : "checkpoint") << '\n'
        << "points = " << sub.size() << " of " << set.size() << (sub.size() < set.size() ? " (stratified subsample)" : "") << '\n'
        << "silhouette = " << res.silhouette << '\n'
        << "feature_silhouette = " << res.feature_silhouette << '\n'
        << "final_kl = " << res.embedding.kl_trace.back() << '\n'
        << "unconverged_perplexity_rows = " << res.embedding.unconverged_rows << '\n';
    if (skipped) rep << "warning = " << skipped << " points in singleton classes skipped by silhouette\n";

    fs::create_directories(cfg.output_dir);
    write_text(artifact(cfg, "embedding.csv"), emb.str());
    write_text(artifact(cfg, "kl_trace.csv"), kl.str());
    write_text(artifact(cfg, "embed_report.txt"), rep.str());
    out << rep.str();
    return res;
}

// ---------------------------------------------------------------- ablate

struct AblationRow {
    AblationCell cell;
    std::optional<double> test_accuracy;
    std::string error;  // set when the cell failed
};

/// Full pipeline per grid cell, in memory, with the run's seeds.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    if (cfg.ablate_grid.empty()) throw Error(ErrorCode::InvalidConfig, "ablate.grid is empty");
    std::vector<AblationRow> rows;
    for (const auto& cell : cfg.ablate_grid) {
        AblationRow row{cell, std::nullopt, {}};
        RunConfig c = cfg;
        c.window_len = cell.window_len;
        c.stride = cell.stride;
        c.train.early_stop.enabled = cell.early_stop;
        const int code = run_command(
            [&] {
                c.validate();
                const auto d = prepare_dataset(c, c.window_len, c.stride);
                const auto t = train_model(c, c.model_config(), d.train);
                row.test_accuracy = evaluate_model(t.model, d.test, c.catalog_for().class_names()).metrics.overall_accuracy;
            },
            out);
        if (code != kExitOk) row.error = "exit " + std::to_string(code);
        out << "cell " << cell.window_len << '/' << cell.stride << '/' << (cell.early_stop ? 1 : 0) << ": "
            << (row.test_accuracy ? std::to_string(*row.test_accuracy) : row.error) << '\n';
        rows.push_back(row);
    }
    std::ostringstream csv;
    csv << "window,stride,early_stop,test_accuracy\n";
    csv.precision(9);
    for (const auto& r : rows) {
        csv << r.cell.window_len << ',' << r.cell.stride << ',' << (r.cell.early_stop ? 1 : 0) << ',';
        if (r.test_accuracy) csv << *r.test_accuracy;
        else csv << "failed (" << r.error << ")";
        csv << '\n';
    }
    fs::create_directories(cfg.output_dir);
    write_text(artifact(cfg, "ablation.csv"), csv.str());
    return rows;
}

// ---------------------------------------------------------------- report

/// Collects whichever artifacts exist into report.txt.
inline std::string cmd_report(const RunConfig& cfg, std::ostream& out) {
    std::ostringstream rep;
    for (const char* name : {"ingest_summary.txt", "train_report.txt", "metrics.txt", "embed_report.txt", "ablation.csv"}) {
        const auto path = artifact(cfg, name);
        rep << "== " << name << " ==\n";
        if (!fs::exists(path)) {
            rep << "(missing)\n\n";
            continue;
        }
        std::ifstream f(path);
        rep << f.rdbuf() << '\n';
    }
    fs::create_directories(cfg.output_dir);
    write_text(artifact(cfg, "report.txt"), rep.str());
    out << rep.str();
    return rep.str();
}

} // namespace vibcnn::cli
