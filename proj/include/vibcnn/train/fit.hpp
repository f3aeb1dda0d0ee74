#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/nn/model.hpp"
#include "vibcnn/pipeline/segment.hpp"
#include "vibcnn/train/adam.hpp"

namespace vibcnn::train {

struct EarlyStopConfig {
    bool enabled = true;
    std::size_t patience = 5;
    double val_fraction = 0.1;
};

struct TrainConfig {
    std::size_t max_epochs = 50;
    std::size_t batch_size = 32;
    AdamConfig adam;
    EarlyStopConfig early_stop;
    std::uint64_t seed = 0;

    void validate() const {
        adam.validate();
        if (max_epochs == 0) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
        if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
        if (early_stop.patience < 1) throw Error(ErrorCode::InvalidConfig, "patience must be >= 1");
        if (!(early_stop.val_fraction > 0 && early_stop.val_fraction < 0.5))
            throw Error(ErrorCode::InvalidConfig, "val_fraction must lie in (0, 0.5)");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0;
    double train_acc = 0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_acc = std::numeric_limits<double>::quiet_NaN();
};

struct History {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 before any epoch
    bool stopped_early = false;

    void write_csv(std::ostream& out) const {
        out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
        out.precision(9);
        for (const auto& e : epochs)
            out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc << '\n';
    }
};

struct EvalStats {
    double loss = 0;
    double accuracy = 0;
};

/// Mean cross-entropy and accuracy in inference mode.
template <typename T>
EvalStats evaluate_loss(const nn::Model<T>& model, const pipeline::SegmentSet& set, std::size_t chunk = 64) {
    if (set.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate an empty set");
    const std::size_t classes = model.config().class_count;
    std::vector<T> buf;
    std::vector<T> probs(classes);
    double loss = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < set.size(); start += chunk) {
        const std::size_t n = std::min(chunk, set.size() - start);
        buf.assign(set.data.begin() + static_cast<std::ptrdiff_t>(start * set.window_len),
                   set.data.begin() + static_cast<std::ptrdiff_t>((start + n) * set.window_len));
        const auto logits = model.predict_logits(buf, n);
        for (std::size_t i = 0; i < n; ++i) {
            const T* row = logits.data() + i * classes;
            const auto label = set.labels[start + i];
            loss += static_cast<double>(nn::kernel::softmax_xent_forward(row, classes, label, probs.data()));
            std::size_t best = 0;
            for (std::size_t k = 1; k < classes; ++k)
                if (row[k] > row[best]) best = k;
            correct += best == label;
        }
    }
    return {loss / static_cast<double>(set.size()), static_cast<double>(correct) / static_cast<double>(set.size())};
}

/// Test seams and progress callbacks.
struct FitHooks {
    /// Replaces the measured validation loss of an epoch (1-based).
    std::function<double(std::size_t epoch, double measured)> val_loss_override;
    std::function<void(const EpochRecord&)> on_epoch;
    /// Called after each epoch with the current parameters (used to snapshot in tests).
    std::function<void(std::size_t epoch, std::span<const nn::Param<float>>)> on_epoch_params;
};

template <typename T>
struct FitResult {
    History history;
    AdamState<T> optimizer;
};

/// Mini-batch Adam on mean cross-entropy. With early stopping enabled a
/// stratified validation slice is carved from `train_set`; training halts after
/// `patience` epochs without a strict val-loss decrease and the best-epoch
/// parameters are restored into `model`.
template <typename T>
FitResult<T> fit(nn::Model<T>& model, const pipeline::SegmentSet& train_set, const TrainConfig& cfg, const FitHooks& hooks = {}) {
    cfg.validate();
    if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
    if (train_set.window_len != model.config().window_len)
        throw Error(ErrorCode::ShapeMismatch, "segments of length " + std::to_string(train_set.window_len) +
                                                  " do not fit a model with window " + std::to_string(model.config().window_len));
    if (train_set.class_count > model.config().class_count)
        throw Error(ErrorCode::ShapeMismatch, "dataset has more classes than the model");

    pipeline::SegmentSet fit_set;
    std::optional<pipeline::SegmentSet> val_set;
    if (cfg.early_stop.enabled) {
        pipeline::SplitSpec carve{1.0 - cfg.early_stop.val_fraction, pipeline::SplitMode::random_stratified,
                                  derive_seed(cfg.seed, {0x7a1u})};
        auto [tr, va] = pipeline::split(train_set, carve);
        if (va.empty()) throw Error(ErrorCode::EmptyDataset, "validation carve-out is empty; need more training segments");
        fit_set = std::move(tr);
        val_set = std::move(va);
    } else {
        fit_set = train_set;
    }

    FitResult<T> result{{}, AdamState<T>::zeros_like(model.parameters())};
    History& history = result.history;
    const std::size_t classes = model.config().class_count;
    const std::size_t w = fit_set.window_len;

    std::vector<std::vector<T>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<T> batch_x;
    std::vector<std::uint32_t> batch_y;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double loss_sum = 0;
        std::size_t correct = 0;
        const auto order = pipeline::batches(fit_set, cfg.batch_size, cfg.seed, epoch - 1);
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const auto& idx = order[bi];
            batch_x.resize(idx.size() * w);
            batch_y.resize(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const auto row = fit_set.row(idx[j]);
                std::copy(row.begin(), row.end(), batch_x.begin() + static_cast<std::ptrdiff_t>(j * w));
                batch_y[j] = fit_set.labels[idx[j]];
            }

            model.zero_grad();
            nn::Tensor<T> logits;
            T loss;
            try {
                logits = model.forward(batch_x, idx.size(), nn::Mode::training);
                loss = model.backward(batch_y);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFiniteActivation) throw;
                throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " + std::to_string(bi + 1) +
                                                          ": " + e.what());
            }
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "epoch " << epoch << " batch " << bi + 1 << ": loss " << loss;
                throw Error(ErrorCode::NonFiniteLoss, msg.str());
            }
            adam_step<T>(model.parameters(), result.optimizer, cfg.adam);

            loss_sum += static_cast<double>(loss) * static_cast<double>(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const T* row = logits.data() + j * classes;
                std::size_t best = 0;
                for (std::size_t k = 1; k < classes; ++k)
                    if (row[k] > row[best]) best = k;
                correct += best == batch_y[j];
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(fit_set.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(fit_set.size());
        if (val_set) {
            const auto stats = evaluate_loss(model, *val_set);
            rec.val_loss = stats.loss;
            rec.val_acc = stats.accuracy;
            if (hooks.val_loss_override) rec.val_loss = hooks.val_loss_override(epoch, rec.val_loss);
        }
        history.epochs.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        if constexpr (std::is_same_v<T, float>)
            if (hooks.on_epoch_params) hooks.on_epoch_params(epoch, model.parameters());

        if (!val_set) {
            history.best_epoch = epoch;
            continue;
        }
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            history.best_epoch = epoch;
            since_best = 0;
            best_params.clear();
            for (const auto& p : model.parameters()) best_params.emplace_back(p.value.values().begin(), p.value.values().end());
        } else if (++since_best >= cfg.early_stop.patience) {
            history.stopped_early = true;
            break;
        }
    }

    if (val_set && !best_params.empty()) {
        auto params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i)
            std::copy(best_params[i].begin(), best_params[i].end(), params[i].value.data());
    }
    return result;
}

} // namespace vibcnn::train
