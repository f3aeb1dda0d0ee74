#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/nn/kernels.hpp"
#include "vibcnn/nn/tensor.hpp"
#include "vibcnn/random.hpp"

namespace vibcnn::nn {

/// Layer sizes. Defaults are the bearing-diagnosis network:
/// Conv(64,k100) ReLU Conv(32,k50) ReLU MaxPool(4,4) Flatten Dense(100) ReLU Dropout Dense(C).
struct ModelConfig {
    std::size_t window_len = 500;
    std::size_t class_count = 14;
    std::size_t conv1_filters = 64;
    std::size_t conv1_kernel = 100;
    std::size_t conv2_filters = 32;
    std::size_t conv2_kernel = 50;
    std::size_t pool_size = 4;
    std::size_t pool_stride = 4;
    std::size_t dense_hidden = 100;
    double dropout_p = 0.0;

    std::size_t conv1_len() const { return window_len - conv1_kernel + 1; }
    std::size_t conv2_len() const { return conv1_len() - conv2_kernel + 1; }
    std::size_t pool_len() const { return kernel::pool_out_len(conv2_len(), pool_size, pool_stride); }
    std::size_t flatten_dim() const { return conv2_filters * pool_len(); }

    std::size_t parameter_count() const {
        return conv1_filters * conv1_kernel + conv1_filters                    // conv1
               + conv2_filters * conv1_filters * conv2_kernel + conv2_filters  // conv2
               + flatten_dim() * dense_hidden + dense_hidden                   // dense1
               + dense_hidden * class_count + class_count;                     // dense2
    }

    void validate() const {
        if (class_count < 2) throw Error(ErrorCode::InvalidConfig, "class_count must be >= 2");
        if (!conv1_filters || !conv1_kernel || !conv2_filters || !conv2_kernel || !pool_size || !pool_stride || !dense_hidden)
            throw Error(ErrorCode::InvalidConfig, "layer sizes must be positive");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout_p must lie in [0, 1)");
        // W - k1 - k2 + 2 >= pool
        if (window_len + 2 < conv1_kernel + conv2_kernel + pool_size)
            throw Error(ErrorCode::ShapeUnderflow, "window " + std::to_string(window_len) + " too short for kernels " +
                                                       std::to_string(conv1_kernel) + "+" + std::to_string(conv2_kernel) +
                                                       " and pool " + std::to_string(pool_size));
    }

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

enum class Mode { inference, training };

/// The fixed layer stack plus per-example activation caches for backprop.
template <typename T>
class Model {
public:
    enum ParamIndex { conv1_w, conv1_b, conv2_w, conv2_b, dense1_w, dense1_b, dense2_w, dense2_b, kParamCount };

    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto& c = cfg_;
        auto make = [](std::string name, std::vector<std::size_t> shape) {
            return Param<T>{std::move(name), Tensor<T>(shape), Tensor<T>(shape)};
        };
        params_[conv1_w] = make("conv1.weight", {c.conv1_filters, 1, c.conv1_kernel});
        params_[conv1_b] = make("conv1.bias", {c.conv1_filters});
        params_[conv2_w] = make("conv2.weight", {c.conv2_filters, c.conv1_filters, c.conv2_kernel});
        params_[conv2_b] = make("conv2.bias", {c.conv2_filters});
        params_[dense1_w] = make("dense1.weight", {c.dense_hidden, c.flatten_dim()});
        params_[dense1_b] = make("dense1.bias", {c.dense_hidden});
        params_[dense2_w] = make("dense2.weight", {c.class_count, c.dense_hidden});
        params_[dense2_b] = make("dense2.bias", {c.class_count});
    }

    const ModelConfig& config() const { return cfg_; }
    std::size_t flatten_dim() const { return cfg_.flatten_dim(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    std::span<Param<T>> parameters() { return params_; }
    std::span<const Param<T>> parameters() const { return params_; }
    Param<T>& parameter(ParamIndex i) { return params_[i]; }
    const Param<T>& parameter(ParamIndex i) const { return params_[i]; }

    /// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
    void init_params(std::uint64_t seed) {
        const auto& c = cfg_;
        const std::size_t fan_in[kParamCount] = {c.conv1_kernel, 0, c.conv1_filters * c.conv2_kernel, 0, c.flatten_dim(), 0,
                                                 c.dense_hidden, 0};
        for (std::size_t i = 0; i < kParamCount; ++i) {
            auto& v = params_[i].value;
            if (fan_in[i] == 0) {
                v.fill(T{0});
                continue;
            }
            Rng rng(derive_seed(seed, {0x1417u, i}));
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in[i]));
            for (auto& w : v.values()) w = static_cast<T>(rng.normal(0.0, stddev));
        }
        dropout_seed_ = derive_seed(seed, {0xd20u});
        step_ = 0;
    }

    /// Dropout masks are a function of (seed, forward step, example).
    void init_dropout_stream(std::uint64_t seed, std::uint64_t step = 0) {
        dropout_seed_ = seed;
        step_ = step;
    }

    void zero_grad() {
        for (auto& p : params_) p.grad.fill(T{0});
    }

    /// Logits (B, C) for `batch` (B rows of window_len samples). Training mode
    /// keeps the activations needed by backward().
    Tensor<T> forward(std::span<const T> batch, std::size_t batch_size, Mode mode) {
        const auto& c = cfg_;
        if (batch.size() != batch_size * c.window_len)
            throw Error(ErrorCode::ShapeMismatch, "batch of " + std::to_string(batch.size()) + " samples is not " +
                                                      std::to_string(batch_size) + " x " + std::to_string(c.window_len));
        Tensor<T> logits({batch_size, c.class_count});
        const bool training = mode == Mode::training;
        if (training) {
            if (caches_.size() < batch_size) caches_.resize(batch_size);
            cached_batch_ = batch_size;
            ++step_;
        } else {
            cached_batch_ = 0;
        }
        Activations local;
        for (std::size_t b = 0; b < batch_size; ++b) {
            Activations& a = training ? caches_[b] : local;
            forward_one(batch.subspan(b * c.window_len, c.window_len), a, training, b);
            std::copy(a.logits.begin(), a.logits.end(), logits.data() + b * c.class_count);
        }
        if (!all_finite<T>(logits.values())) throw Error(ErrorCode::NonFiniteActivation, "non-finite logits in forward pass");
        return logits;
    }

    Tensor<T> forward(const Tensor<T>& batch, Mode mode) {
        if (batch.rank() == 0 || batch.size() % cfg_.window_len != 0 || batch.shape().back() != cfg_.window_len)
            throw Error(ErrorCode::ShapeMismatch, "input " + batch.shape_string() + " does not end in window " +
                                                      std::to_string(cfg_.window_len));
        return forward(batch.values(), batch.dim(0), mode);
    }

    /// Mean cross-entropy of the last training forward; accumulates its gradient
    /// into every parameter's grad (call zero_grad() first).
    T backward(std::span<const std::uint32_t> labels) {
        const auto& c = cfg_;
        if (labels.size() != cached_batch_)
            throw Error(ErrorCode::ShapeMismatch, "backward needs " + std::to_string(cached_batch_) + " labels from a training forward");
        const T inv_batch = T{1} / static_cast<T>(cached_batch_);
        T loss_sum = 0;
        std::vector<T> probs(c.class_count);
        for (std::size_t b = 0; b < cached_batch_; ++b) {
            if (labels[b] >= c.class_count) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[b]));
            auto& a = caches_[b];
            loss_sum += kernel::softmax_xent_forward(a.logits.data(), c.class_count, labels[b], probs.data());
            for (std::size_t k = 0; k < c.class_count; ++k) probs[k] *= inv_batch;
            probs[labels[b]] -= inv_batch;
            backward_one(a, probs);
        }
        return loss_sum * inv_batch;
    }

    /// Hidden dense activations (post-ReLU, before dropout), shape (B, dense_hidden).
    Tensor<T> features(std::span<const T> batch, std::size_t batch_size) const {
        const auto& c = cfg_;
        if (batch.size() != batch_size * c.window_len) throw Error(ErrorCode::ShapeMismatch, "feature batch shape");
        Tensor<T> out({batch_size, c.dense_hidden});
        Activations a;
        for (std::size_t b = 0; b < batch_size; ++b) {
            forward_one(batch.subspan(b * c.window_len, c.window_len), a, false, 0);
            std::copy(a.hidden.begin(), a.hidden.end(), out.data() + b * c.dense_hidden);
        }
        return out;
    }

    /// Inference-mode logits; read-only over the parameters.
    Tensor<T> predict_logits(std::span<const T> batch, std::size_t batch_size) const {
        const auto& c = cfg_;
        if (batch.size() != batch_size * c.window_len) throw Error(ErrorCode::ShapeMismatch, "prediction batch shape");
        Tensor<T> out({batch_size, c.class_count});
        Activations a;
        for (std::size_t b = 0; b < batch_size; ++b) {
            forward_one(batch.subspan(b * c.window_len, c.window_len), a, false, 0);
            std::copy(a.logits.begin(), a.logits.end(), out.data() + b * c.class_count);
        }
        if (!all_finite<T>(out.values())) throw Error(ErrorCode::NonFiniteActivation, "non-finite logits in forward pass");
        return out;
    }

    /// Classification head alone: logits from hidden features.
    std::vector<T> head(std::span<const T> hidden) const {
        const auto& c = cfg_;
        std::vector<T> logits(c.class_count);
        kernel::dense_forward(hidden.data(), c.dense_hidden, params_[dense2_w].value.data(), params_[dense2_b].value.data(),
                              c.class_count, logits.data());
        return logits;
    }

    /// Layer shapes in stack order, used for checkpoint headers and messages.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> layer_shapes() const {
        std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
        for (const auto& p : params_) out.emplace_back(p.name, p.value.shape());
        return out;
    }

private:
    struct Activations {
        std::vector<T> input, a1, a2, pooled, hidden, dropped, mask, logits;
        std::vector<std::uint32_t> argmax;
        // gradient scratch
        std::vector<T> d_a1, d_a2, d_pooled, d_hidden;
    };

    void forward_one(std::span<const T> x, Activations& a, bool training, std::size_t example) const {
        const auto& c = cfg_;
        if (!all_finite<T>(x)) throw Error(ErrorCode::NonFiniteActivation, "non-finite input sample");
        a.input.assign(x.begin(), x.end());
        a.a1.resize(c.conv1_filters * c.conv1_len());
        a.a2.resize(c.conv2_filters * c.conv2_len());
        a.pooled.resize(c.flatten_dim());
        a.argmax.resize(c.flatten_dim());
        a.hidden.resize(c.dense_hidden);
        a.logits.resize(c.class_count);

        kernel::conv1d_forward(a.input.data(), 1, c.window_len, params_[conv1_w].value.data(), params_[conv1_b].value.data(),
                               c.conv1_filters, c.conv1_kernel, a.a1.data());
        kernel::relu_forward(a.a1.data(), a.a1.size());
        kernel::conv1d_forward(a.a1.data(), c.conv1_filters, c.conv1_len(), params_[conv2_w].value.data(),
                               params_[conv2_b].value.data(), c.conv2_filters, c.conv2_kernel, a.a2.data());
        kernel::relu_forward(a.a2.data(), a.a2.size());
        kernel::maxpool_forward(a.a2.data(), c.conv2_filters, c.conv2_len(), c.pool_size, c.pool_stride, a.pooled.data(),
                                a.argmax.data());
        kernel::dense_forward(a.pooled.data(), c.flatten_dim(), params_[dense1_w].value.data(), params_[dense1_b].value.data(),
                              c.dense_hidden, a.hidden.data());
        kernel::relu_forward(a.hidden.data(), a.hidden.size());

        const T* head_in = a.hidden.data();
        if (training && c.dropout_p > 0.0) {
            a.mask = dropout_mask<T>(c.dense_hidden, c.dropout_p, derive_seed(dropout_seed_, {example}), step_);
            a.dropped.resize(c.dense_hidden);
            for (std::size_t i = 0; i < c.dense_hidden; ++i) a.dropped[i] = a.hidden[i] * a.mask[i];
            head_in = a.dropped.data();
        } else {
            a.mask.assign(c.dense_hidden, T{1});
        }
        kernel::dense_forward(head_in, c.dense_hidden, params_[dense2_w].value.data(), params_[dense2_b].value.data(),
                              c.class_count, a.logits.data());
    }

    void backward_one(Activations& a, std::span<const T> dlogits) {
        const auto& c = cfg_;
        const T* head_in = c.dropout_p > 0.0 ? a.dropped.data() : a.hidden.data();

        a.d_hidden.assign(c.dense_hidden, T{0});
        kernel::dense_backward(head_in, c.dense_hidden, params_[dense2_w].value.data(), c.class_count, dlogits.data(),
                               a.d_hidden.data(), params_[dense2_w].grad.data(), params_[dense2_b].grad.data());
        for (std::size_t i = 0; i < c.dense_hidden; ++i) a.d_hidden[i] *= a.mask[i];
        kernel::relu_backward(a.hidden.data(), a.d_hidden.data(), c.dense_hidden);

        a.d_pooled.assign(c.flatten_dim(), T{0});
        kernel::dense_backward(a.pooled.data(), c.flatten_dim(), params_[dense1_w].value.data(), c.dense_hidden,
                               a.d_hidden.data(), a.d_pooled.data(), params_[dense1_w].grad.data(),
                               params_[dense1_b].grad.data());

        a.d_a2.assign(a.a2.size(), T{0});
        kernel::maxpool_backward(a.d_pooled.data(), a.argmax.data(), a.argmax.size(), a.d_a2.data());
        kernel::relu_backward(a.a2.data(), a.d_a2.data(), a.d_a2.size());

        a.d_a1.assign(a.a1.size(), T{0});
        kernel::conv1d_backward(a.a1.data(), c.conv1_filters, c.conv1_len(), params_[conv2_w].value.data(), c.conv2_filters,
                                c.conv2_kernel, a.d_a2.data(), a.d_a1.data(), params_[conv2_w].grad.data(),
                                params_[conv2_b].grad.data());
        kernel::relu_backward(a.a1.data(), a.d_a1.data(), a.d_a1.size());

        kernel::conv1d_backward<T>(a.input.data(), 1, c.window_len, params_[conv1_w].value.data(), c.conv1_filters,
                                   c.conv1_kernel, a.d_a1.data(), nullptr, params_[conv1_w].grad.data(),
                                   params_[conv1_b].grad.data());
    }

    ModelConfig cfg_;
    std::array<Param<T>, kParamCount> params_;
    std::vector<Activations> caches_;
    std::size_t cached_batch_ = 0;
    std::uint64_t dropout_seed_ = 0;
    std::uint64_t step_ = 0;
};

template <typename T>
Model<T> build_model(const ModelConfig& cfg) {
    return Model<T>(cfg);
}

} // namespace vibcnn::nn
