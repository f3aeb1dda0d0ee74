#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/nn/model.hpp"
#include "vibcnn/pipeline/segment.hpp"

namespace vibcnn::eval {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t class_count = 0;
    std::vector<std::uint64_t> counts;  // row-major C x C
    std::vector<std::string> class_names;

    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * class_count + predicted]; }

    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (auto c : counts) n += c;
        return n;
    }
    std::uint64_t trace() const {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < class_count; ++i) n += at(i, i);
        return n;
    }
    std::uint64_t support(std::size_t truth) const {
        std::uint64_t n = 0;
        for (std::size_t p = 0; p < class_count; ++p) n += at(truth, p);
        return n;
    }

    /// Header row of class names, then C rows of C counts.
    void write_csv(std::ostream& out) const {
        for (std::size_t i = 0; i < class_count; ++i) out << (i ? "," : "") << class_names[i];
        out << '\n';
        for (std::size_t t = 0; t < class_count; ++t) {
            for (std::size_t p = 0; p < class_count; ++p) out << (p ? "," : "") << at(t, p);
            out << '\n';
        }
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
    double overall_accuracy = 0;
    std::vector<double> per_class_recall;  // NaN for classes without test support
    double macro_recall = 0;               // over classes with support

    void write_report(std::ostream& out, const std::vector<std::string>& class_names) const {
        out.precision(9);
        out << "overall_accuracy=" << overall_accuracy << '\n';
        out << "macro_recall=" << macro_recall << '\n';
        for (std::size_t i = 0; i < per_class_recall.size(); ++i) out << "recall." << class_names[i] << '=' << per_class_recall[i] << '\n';
    }
};

inline std::vector<std::string> default_class_names(std::size_t class_count) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < class_count; ++i) names.push_back("Class " + std::to_string(i + 1));
    return names;
}

inline Metrics metrics_of(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw Error(ErrorCode::UndefinedOnEmpty, "accuracy is undefined for zero evaluated segments");
    Metrics m;
    m.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    double recall_sum = 0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < cm.class_count; ++c) {
        const auto s = cm.support(c);
        if (s == 0) {
            m.per_class_recall.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double r = static_cast<double>(cm.at(c, c)) / static_cast<double>(s);
        m.per_class_recall.push_back(r);
        recall_sum += r;
        ++supported;
    }
    m.macro_recall = recall_sum / static_cast<double>(supported);
    return m;
}

struct Evaluation {
    ConfusionMatrix confusion;
    Metrics metrics;
};

inline Evaluation confusion(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted, std::size_t class_count,
                            std::vector<std::string> class_names = {}) {
    if (truth.size() != predicted.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(truth.size()) + " true labels vs " + std::to_string(predicted.size()) + " predictions");
    ConfusionMatrix cm;
    cm.class_count = class_count;
    cm.counts.assign(class_count * class_count, 0);
    cm.class_names = class_names.empty() ? default_class_names(class_count) : std::move(class_names);
    if (cm.class_names.size() != class_count) throw Error(ErrorCode::LengthMismatch, "class name count differs from class count");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= class_count || predicted[i] >= class_count)
            throw Error(ErrorCode::LabelOutOfRange, "pair " + std::to_string(i) + " has a label >= " + std::to_string(class_count));
        ++cm.counts[truth[i] * class_count + predicted[i]];
    }
    return {cm, metrics_of(cm)};
}

/// Argmax with ties going to the lowest index.
template <typename T>
std::uint32_t argmax(std::span<const T> row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return static_cast<std::uint32_t>(best);
}

inline void check_compatible(const nn::Model<float>& model, const pipeline::SegmentSet& set) {
    if (set.window_len != model.config().window_len)
        throw Error(ErrorCode::ShapeMismatch, "segments of length " + std::to_string(set.window_len) + " vs model window " +
                                                  std::to_string(model.config().window_len));
    if (set.class_count > model.config().class_count)
        throw Error(ErrorCode::ShapeMismatch, "segment set has " + std::to_string(set.class_count) + " classes, model " +
                                                  std::to_string(model.config().class_count));
}

/// Inference-mode class predictions for every segment.
inline std::vector<std::uint32_t> predict(const nn::Model<float>& model, const pipeline::SegmentSet& set, std::size_t chunk = 64) {
    check_compatible(model, set);
    std::vector<std::uint32_t> out;
    out.reserve(set.size());
    const auto classes = model.config().class_count;
    for (std::size_t start = 0; start < set.size(); start += chunk) {
        const std::size_t n = std::min(chunk, set.size() - start);
        const auto logits = model.predict_logits(
            std::span<const float>(set.data).subspan(start * set.window_len, n * set.window_len), n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(argmax<float>(logits.values().subspan(i * classes, classes)));
    }
    return out;
}

/// N x dense_hidden matrix of post-ReLU hidden activations.
inline nn::Tensor<float> extract_features(const nn::Model<float>& model, const pipeline::SegmentSet& set) {
    check_compatible(model, set);
    return model.features(set.data, set.size());
}

/// Majority vote of segment predictions per record; ties go to the lowest class.
inline Evaluation record_vote(const pipeline::SegmentSet& set, std::span<const std::uint32_t> predicted, std::size_t class_count,
                              std::vector<std::string> class_names = {}) {
    if (predicted.size() != set.size()) throw Error(ErrorCode::LengthMismatch, "one prediction per segment required");
    std::map<std::uint32_t, std::vector<std::size_t>> votes;
    std::map<std::uint32_t, std::uint32_t> record_label;
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto& v = votes[set.record_ids[i]];
        v.resize(class_count, 0);
        if (predicted[i] >= class_count) throw Error(ErrorCode::LabelOutOfRange, "prediction outside class range");
        ++v[predicted[i]];
        record_label[set.record_ids[i]] = set.labels[i];
    }
    std::vector<std::uint32_t> truth, pred;
    for (const auto& [record, v] : votes) {
        truth.push_back(record_label[record]);
        pred.push_back(argmax<std::size_t>(v));
    }
    return confusion(truth, pred, class_count, std::move(class_names));
}

} // namespace vibcnn::eval
