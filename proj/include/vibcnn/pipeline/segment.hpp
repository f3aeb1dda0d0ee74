#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/ingest/signal.hpp"
#include "vibcnn/random.hpp"

namespace vibcnn::pipeline {

/// N fixed-length windows stored row-major, with labels and record of origin.
struct SegmentSet {
    std::vector<float> data;  // N * window_len
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> record_ids;
    std::size_t window_len = 0;
    std::size_t stride = 0;   // 0 when unknown (e.g. loaded from a cache)
    std::uint32_t class_count = 0;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    std::span<const float> row(std::size_t i) const { return {data.data() + i * window_len, window_len}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * window_len, window_len}; }

    void push_back(std::span<const float> window, std::uint32_t label, std::uint32_t record_id) {
        data.insert(data.end(), window.begin(), window.end());
        labels.push_back(label);
        record_ids.push_back(record_id);
    }

    /// Rows `indices` in the given order.
    SegmentSet subset(std::span<const std::size_t> indices) const {
        SegmentSet out{{}, {}, {}, window_len, stride, class_count};
        out.data.reserve(indices.size() * window_len);
        for (auto i : indices) out.push_back(row(i), labels[i], record_ids[i]);
        return out;
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(class_count, 0);
        for (auto l : labels) ++counts[l];
        return counts;
    }

    void validate() const {
        if (labels.size() != record_ids.size() || data.size() != labels.size() * window_len)
            throw Error(ErrorCode::ShapeMismatch, "segment set rows, labels and record ids disagree");
        for (auto l : labels)
            if (l >= class_count) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " >= class count");
    }
};

inline std::size_t window_count(std::size_t length, std::size_t window, std::size_t stride) {
    if (stride == 0) throw Error(ErrorCode::ZeroStride, "stride must be >= 1");
    if (window == 0) throw Error(ErrorCode::InvalidConfig, "window must be >= 1");
    if (window > length)
        throw Error(ErrorCode::WindowTooLong, "window " + std::to_string(window) + " exceeds signal length " + std::to_string(length));
    return (length - window) / stride + 1;
}

/// Windows start at 0, S, 2S, ...; trailing samples that cannot fill a window are dropped.
inline std::vector<std::vector<float>> segment(std::span<const double> samples, std::size_t window, std::size_t stride) {
    const auto n = window_count(samples.size(), window, stride);
    std::vector<std::vector<float>> out(n, std::vector<float>(window));
    for (std::size_t w = 0; w < n; ++w) {
        const auto* src = samples.data() + w * stride;
        std::transform(src, src + window, out[w].begin(), [](double v) { return static_cast<float>(v); });
    }
    return out;
}

inline std::vector<std::vector<float>> segment(const ingest::Signal& signal, std::size_t window, std::size_t stride) {
    return segment(std::span<const double>(signal.samples), window, stride);
}

/// Per-window z-score: (x - mean) / (std + 1e-8). Identity when disabled.
inline void normalize_segment(std::span<float> window, bool enabled) {
    if (!enabled || window.empty()) return;
    double mean = 0.0;
    for (float v : window) mean += v;
    mean /= static_cast<double>(window.size());
    double var = 0.0;
    for (float v : window) var += (v - mean) * (v - mean);
    var /= static_cast<double>(window.size());
    const double denom = std::sqrt(var) + 1e-8;
    for (auto& v : window) v = static_cast<float>((v - mean) / denom);
}

inline void normalize_all(SegmentSet& set, bool enabled) {
    if (!enabled) return;
    for (std::size_t i = 0; i < set.size(); ++i) normalize_segment(set.row(i), true);
}

/// Segments every labeled signal into one set; record ids follow input order.
inline SegmentSet build_segment_set(std::span<const ingest::Signal> signals, std::size_t window, std::size_t stride,
                                    std::uint32_t class_count, bool normalize) {
    SegmentSet set{{}, {}, {}, window, stride, class_count};
    for (std::size_t r = 0; r < signals.size(); ++r) {
        const auto& sig = signals[r];
        if (!sig.class_label) throw Error(ErrorCode::InvalidConfig, "signal '" + sig.source_id + "' has no class label");
        sig.validate(static_cast<int>(class_count));
        for (auto& w : segment(sig, window, stride)) {
            normalize_segment(w, normalize);
            set.push_back(w, static_cast<std::uint32_t>(*sig.class_label), static_cast<std::uint32_t>(r));
        }
    }
    return set;
}

enum class SplitMode { random_stratified, block_per_record };

struct SplitSpec {
    double train_fraction = 0.7;
    SplitMode mode = SplitMode::random_stratified;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline SplitIndices split_indices(const SegmentSet& set, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
    const auto counts = set.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 1)
            throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has only 1 segment");

    SplitIndices out;
    if (spec.mode == SplitMode::random_stratified) {
        Rng rng(derive_seed(spec.seed, {0x5b1u}));
        for (std::uint32_t c = 0; c < set.class_count; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < set.size(); ++i)
                if (set.labels[i] == c) members.push_back(i);
            rng.shuffle(std::span<std::size_t>(members));
            const auto n_train = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(members.size())));
            out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
            out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
        }
    } else {
        if (set.stride == 0) throw Error(ErrorCode::InvalidConfig, "block split needs a known stride");
        // rows of one record appear in offset order, so the k-th row sits at offset k*stride
        std::vector<std::vector<std::size_t>> by_record;
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto r = set.record_ids[i];
            if (r >= by_record.size()) by_record.resize(r + 1);
            by_record[r].push_back(i);
        }
        for (const auto& rows : by_record) {
            if (rows.empty()) continue;
            const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(rows.size())));
            out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
            std::size_t first_test = n_train;
            if (n_train > 0) {
                const std::size_t train_end = (n_train - 1) * set.stride + set.window_len;
                while (first_test < rows.size() && first_test * set.stride < train_end) ++first_test;
            }
            out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(first_test), rows.end());
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<SegmentSet, SegmentSet> split(const SegmentSet& set, const SplitSpec& spec) {
    const auto idx = split_indices(set, spec);
    return {set.subset(idx.train), set.subset(idx.test)};
}

/// A permutation of 0..n-1 fixed by (seed, epoch), cut into batch_size chunks.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0xba7c4u, epoch}));
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size)
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return out;
}

inline std::vector<std::vector<std::size_t>> batches(const SegmentSet& set, std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch) {
    return batches(set.size(), batch_size, seed, epoch);
}

} // namespace vibcnn::pipeline
