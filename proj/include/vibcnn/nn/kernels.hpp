#pragma once

// Forward and backward kernels for every layer type in the network.
//
// The raw-pointer kernels are the hot path. Loops are written as axpy
// updates over contiguous rows so they vectorize without reassociating
// floating-point sums; results therefore do not depend on the vector width.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/nn/tensor.hpp"
#include "vibcnn/random.hpp"

namespace vibcnn::nn {

namespace kernel {

/// y[o,t] = b[o] + sum_{c,k} x[c,t+k] * w[o,c,k]   (valid, stride 1, no flip)
template <typename T>
void conv1d_forward(const T* __restrict x, std::size_t in_c, std::size_t len, const T* __restrict w,
                    const T* __restrict b, std::size_t out_c, std::size_t ksize, T* __restrict y) {
    const std::size_t out_len = len - ksize + 1;
    for (std::size_t o = 0; o < out_c; ++o) {
        T* __restrict yo = y + o * out_len;
        std::fill(yo, yo + out_len, b[o]);
        for (std::size_t c = 0; c < in_c; ++c) {
            const T* wk = w + (o * in_c + c) * ksize;
            const T* xc = x + c * len;
            std::size_t k = 0;
            for (; k + 4 <= ksize; k += 4) {
                const T w0 = wk[k], w1 = wk[k + 1], w2 = wk[k + 2], w3 = wk[k + 3];
                const T* __restrict xs = xc + k;
                for (std::size_t t = 0; t < out_len; ++t)
                    yo[t] += w0 * xs[t] + w1 * xs[t + 1] + w2 * xs[t + 2] + w3 * xs[t + 3];
            }
            for (; k < ksize; ++k) {
                const T wv = wk[k];
                const T* __restrict xs = xc + k;
                for (std::size_t t = 0; t < out_len; ++t) yo[t] += wv * xs[t];
            }
        }
    }
}

/// Accumulates dw, db and (when dx != nullptr) dx for conv1d_forward.
template <typename T>
void conv1d_backward(const T* __restrict x, std::size_t in_c, std::size_t len, const T* __restrict w, std::size_t out_c,
                     std::size_t ksize, const T* __restrict dy, T* __restrict dx, T* __restrict dw, T* __restrict db) {
    const std::size_t out_len = len - ksize + 1;
    for (std::size_t o = 0; o < out_c; ++o) {
        const T* __restrict dyo = dy + o * out_len;
        T acc = 0;
        for (std::size_t t = 0; t < out_len; ++t) acc += dyo[t];
        db[o] += acc;

        for (std::size_t c = 0; c < in_c; ++c) {
            // dw[o,c,:] += dy[o,t] * x[c, t:t+K]
            T* __restrict dwk = dw + (o * in_c + c) * ksize;
            const T* xc = x + c * len;
            std::size_t t = 0;
            for (; t + 4 <= out_len; t += 4) {
                const T d0 = dyo[t], d1 = dyo[t + 1], d2 = dyo[t + 2], d3 = dyo[t + 3];
                const T* __restrict xs = xc + t;
                for (std::size_t k = 0; k < ksize; ++k)
                    dwk[k] += d0 * xs[k] + d1 * xs[k + 1] + d2 * xs[k + 2] + d3 * xs[k + 3];
            }
            for (; t < out_len; ++t) {
                const T d = dyo[t];
                const T* __restrict xs = xc + t;
                for (std::size_t k = 0; k < ksize; ++k) dwk[k] += d * xs[k];
            }

            if (dx == nullptr) continue;
            // dx[c, k:k+out_len] += w[o,c,k] * dy[o,:]
            const T* wk = w + (o * in_c + c) * ksize;
            T* __restrict dxc = dx + c * len;
            std::size_t k = 0;
            for (; k + 4 <= ksize; k += 4) {
                const T w0 = wk[k], w1 = wk[k + 1], w2 = wk[k + 2], w3 = wk[k + 3];
                T* __restrict dxs = dxc + k;
                // dxs[j] gathers w0*dy[j] + w1*dy[j-1] + w2*dy[j-2] + w3*dy[j-3]
                auto edge = [&](std::size_t j) {
                    T s = 0;
                    if (j < out_len) s += w0 * dyo[j];
                    if (j >= 1 && j - 1 < out_len) s += w1 * dyo[j - 1];
                    if (j >= 2 && j - 2 < out_len) s += w2 * dyo[j - 2];
                    if (j >= 3 && j - 3 < out_len) s += w3 * dyo[j - 3];
                    dxs[j] += s;
                };
                const std::size_t head = std::min<std::size_t>(3, out_len + 3);
                for (std::size_t j = 0; j < head; ++j) edge(j);
                for (std::size_t j = 3; j < out_len; ++j)
                    dxs[j] += w0 * dyo[j] + w1 * dyo[j - 1] + w2 * dyo[j - 2] + w3 * dyo[j - 3];
                for (std::size_t j = std::max<std::size_t>(3, out_len); j < out_len + 3; ++j) edge(j);
            }
            for (; k < ksize; ++k) {
                const T wv = wk[k];
                T* __restrict dxs = dxc + k;
                for (std::size_t j = 0; j < out_len; ++j) dxs[j] += wv * dyo[j];
            }
        }
    }
}

template <typename T>
void relu_forward(T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > T{0} ? v[i] : T{0};
}

/// Zeroes dy wherever the activation was not positive (derivative at 0 is 0).
template <typename T>
void relu_backward(const T* __restrict activation, T* __restrict dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dy[i] = activation[i] > T{0} ? dy[i] : T{0};
}

inline std::size_t pool_out_len(std::size_t len, std::size_t size, std::size_t stride) {
    return (len - size) / stride + 1;
}

/// Max over each window; ties go to the lowest index.
template <typename T>
void maxpool_forward(const T* __restrict x, std::size_t channels, std::size_t len, std::size_t size, std::size_t stride,
                     T* __restrict y, std::uint32_t* __restrict argmax) {
    const std::size_t out_len = pool_out_len(len, size, stride);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const std::size_t start = c * len + t * stride;
            std::size_t best = 0;
            for (std::size_t j = 1; j < size; ++j)
                if (x[start + j] > x[start + best]) best = j;
            y[c * out_len + t] = x[start + best];
            argmax[c * out_len + t] = static_cast<std::uint32_t>(start + best);
        }
    }
}

template <typename T>
void maxpool_backward(const T* dy, const std::uint32_t* argmax, std::size_t out_count, T* dx) {
    for (std::size_t i = 0; i < out_count; ++i) dx[argmax[i]] += dy[i];
}

template <typename T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
    // fixed lane count keeps the summation order independent of the target ISA
    constexpr std::size_t lanes = 16;
    T acc[lanes] = {};
    std::size_t i = 0;
    for (; i + lanes <= n; i += lanes)
        for (std::size_t j = 0; j < lanes; ++j) acc[j] += a[i + j] * b[i + j];
    T tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    for (std::size_t w = lanes / 2; w > 0; w /= 2)
        for (std::size_t j = 0; j < w; ++j) acc[j] += acc[j + w];
    return acc[0] + tail;
}

/// y = w x + b, with w of shape (m, n).
template <typename T>
void dense_forward(const T* x, std::size_t n, const T* w, const T* b, std::size_t m, T* y) {
    for (std::size_t r = 0; r < m; ++r) y[r] = b[r] + dot(w + r * n, x, n);
}

template <typename T>
void dense_backward(const T* __restrict x, std::size_t n, const T* __restrict w, std::size_t m, const T* __restrict dy,
                    T* __restrict dx, T* __restrict dw, T* __restrict db) {
    for (std::size_t r = 0; r < m; ++r) {
        const T d = dy[r];
        db[r] += d;
        T* __restrict dwr = dw + r * n;
        for (std::size_t i = 0; i < n; ++i) dwr[i] += d * x[i];
        if (dx) {
            const T* __restrict wr = w + r * n;
            for (std::size_t i = 0; i < n; ++i) dx[i] += d * wr[i];
        }
    }
}

/// Stable softmax into probs; returns -ln probs[label].
template <typename T>
T softmax_xent_forward(const T* logits, std::size_t c, std::size_t label, T* probs) {
    T mx = logits[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, logits[i]);
    T sum = 0;
    for (std::size_t i = 0; i < c; ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < c; ++i) probs[i] /= sum;
    // log-sum-exp form avoids log(0) for confident wrong predictions
    return std::log(sum) - (logits[label] - mx);
}

} // namespace kernel

// Tensor-level wrappers with shape checking. These are what the tests and
// small callers use; the model drives the raw kernels directly.

template <typename T>
struct ConvGrads {
    Tensor<T> dx, dw, db;
};

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 3 || b.rank() != 1 || w.dim(1) != x.dim(0) || b.dim(0) != w.dim(0))
        throw Error(ErrorCode::ShapeMismatch, "conv1d x" + x.shape_string() + " w" + w.shape_string() + " b" + b.shape_string());
    if (w.dim(2) > x.dim(1)) throw Error(ErrorCode::KernelTooLong, "kernel " + std::to_string(w.dim(2)) + " > length " + std::to_string(x.dim(1)));
    Tensor<T> y({w.dim(0), x.dim(1) - w.dim(2) + 1});
    kernel::conv1d_forward(x.data(), x.dim(0), x.dim(1), w.data(), b.data(), w.dim(0), w.dim(2), y.data());
    return y;
}

template <typename T>
ConvGrads<T> conv1d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
    if (dy.rank() != 2 || dy.dim(0) != w.dim(0) || dy.dim(1) != x.dim(1) - w.dim(2) + 1)
        throw Error(ErrorCode::ShapeMismatch, "conv1d_backward dy" + dy.shape_string());
    ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({w.dim(0)})};
    kernel::conv1d_backward(x.data(), x.dim(0), x.dim(1), w.data(), w.dim(0), w.dim(2), dy.data(), g.dx.data(), g.dw.data(),
                            g.db.data());
    return g;
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
    kernel::relu_forward(x.data(), x.size());
    return x;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, Tensor<T> dy) {
    if (x.size() != dy.size()) throw Error(ErrorCode::ShapeMismatch, "relu_backward");
    kernel::relu_backward(x.data(), dy.data(), dy.size());
    return dy;
}

template <typename T>
struct PoolResult {
    Tensor<T> y;
    std::vector<std::uint32_t> argmax;  // flat indices into x
};

template <typename T>
PoolResult<T> maxpool1d(const Tensor<T>& x, std::size_t size = 4, std::size_t stride = 4) {
    if (x.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "maxpool1d expects (C, L)");
    if (size == 0 || stride == 0) throw Error(ErrorCode::InvalidConfig, "pool size and stride must be >= 1");
    if (size > x.dim(1)) throw Error(ErrorCode::PoolTooLong, "pool " + std::to_string(size) + " > length " + std::to_string(x.dim(1)));
    const auto out_len = kernel::pool_out_len(x.dim(1), size, stride);
    PoolResult<T> r{Tensor<T>({x.dim(0), out_len}), std::vector<std::uint32_t>(x.dim(0) * out_len)};
    kernel::maxpool_forward(x.data(), x.dim(0), x.dim(1), size, stride, r.y.data(), r.argmax.data());
    return r;
}

template <typename T>
Tensor<T> maxpool1d_backward(const std::vector<std::size_t>& x_shape, const std::vector<std::uint32_t>& argmax, const Tensor<T>& dy) {
    if (dy.size() != argmax.size()) throw Error(ErrorCode::ShapeMismatch, "maxpool1d_backward");
    Tensor<T> dx(x_shape);
    kernel::maxpool_backward(dy.data(), argmax.data(), argmax.size(), dx.data());
    return dx;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1 || w.dim(1) != x.dim(0) || b.dim(0) != w.dim(0))
        throw Error(ErrorCode::ShapeMismatch, "dense x" + x.shape_string() + " w" + w.shape_string() + " b" + b.shape_string());
    Tensor<T> y({w.dim(0)});
    kernel::dense_forward(x.data(), x.dim(0), w.data(), b.data(), w.dim(0), y.data());
    return y;
}

template <typename T>
ConvGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
    if (dy.rank() != 1 || dy.dim(0) != w.dim(0) || w.dim(1) != x.dim(0)) throw Error(ErrorCode::ShapeMismatch, "dense_backward");
    ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({w.dim(0)})};
    kernel::dense_backward(x.data(), x.dim(0), w.data(), w.dim(0), dy.data(), g.dx.data(), g.dw.data(), g.db.data());
    return g;
}

/// Inverted dropout mask: 0 with probability p, else 1/(1-p). Seeded per (seed, step).
template <typename T>
std::vector<T> dropout_mask(std::size_t n, double p, std::uint64_t seed, std::uint64_t step) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout p must lie in [0, 1)");
    std::vector<T> mask(n, T{1});
    if (p == 0.0) return mask;
    Rng rng(derive_seed(seed, {0xd50u, step}));
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& m : mask) m = rng.uniform() < p ? T{0} : keep_scale;
    return mask;
}

template <typename T>
struct DropoutResult {
    Tensor<T> y;
    std::vector<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& x, double p, bool training, std::uint64_t seed, std::uint64_t step = 0) {
    DropoutResult<T> r{x, std::vector<T>(x.size(), T{1})};
    if (!training || p == 0.0) return r;
    r.mask = dropout_mask<T>(x.size(), p, seed, step);
    for (std::size_t i = 0; i < x.size(); ++i) r.y[i] = x[i] * r.mask[i];
    return r;
}

template <typename T>
Tensor<T> dropout_backward(const std::vector<T>& mask, Tensor<T> dy) {
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= mask[i];
    return dy;
}

template <typename T>
struct SoftmaxResult {
    T loss;
    Tensor<T> probs;
};

template <typename T>
SoftmaxResult<T> softmax_xent(const Tensor<T>& logits, std::size_t label) {
    if (logits.size() < 2) throw Error(ErrorCode::ShapeMismatch, "softmax needs at least 2 classes");
    if (label >= logits.size()) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
    SoftmaxResult<T> r{T{0}, Tensor<T>({logits.size()})};
    r.loss = kernel::softmax_xent_forward(logits.data(), logits.size(), label, r.probs.data());
    return r;
}

/// dlogits = probs - onehot(label)
template <typename T>
Tensor<T> softmax_xent_backward(const Tensor<T>& probs, std::size_t label) {
    Tensor<T> d = probs;
    d[label] -= T{1};
    return d;
}

} // namespace vibcnn::nn
