#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/nn/model.hpp"

namespace vibcnn::train {

struct AdamConfig {
    // 1e-3 kills the conv2 ReLUs on some seeds (fan-in 3200); 3e-4 trains on all tried
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
            throw Error(ErrorCode::InvalidConfig, "beta1 and beta2 must lie in [0, 1)");
        if (!(epsilon > 0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
    }
};

/// First and second moment buffers, one pair per parameter tensor.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t t = 0;

    static AdamState zeros_like(std::span<const nn::Param<T>> params) {
        AdamState s;
        for (const auto& p : params) {
            s.m.emplace_back(p.value.size(), T{0});
            s.v.emplace_back(p.value.size(), T{0});
        }
        return s;
    }

    bool operator==(const AdamState&) const = default;
};

/// One Adam update of a single buffer; `t` is the already-incremented step.
template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::uint64_t t,
                 const AdamConfig& cfg) {
    if (theta.size() != grad.size() || theta.size() != m.size() || theta.size() != v.size())
        throw Error(ErrorCode::ShapeMismatch, "adam buffers disagree in size");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T one_b1 = static_cast<T>(1.0 - cfg.beta1), one_b2 = static_cast<T>(1.0 - cfg.beta2);
    const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
    const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.epsilon);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const T g = grad[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        const T m_hat = m[i] * inv_c1;
        const T v_hat = v[i] * inv_c2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

/// Applies one Adam step to every parameter using its accumulated grad.
template <typename T>
void adam_step(std::span<nn::Param<T>> params, AdamState<T>& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw Error(ErrorCode::ShapeMismatch, "adam state holds " + std::to_string(state.m.size()) + " buffers for " +
                                                  std::to_string(params.size()) + " parameters");
    for (const auto& p : params)
        if (!nn::all_finite<T>(p.grad.values())) throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient in " + p.name);
    ++state.t;
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update<T>(params[i].value.values(), params[i].grad.values(), state.m[i], state.v[i], state.t, cfg);
}

} // namespace vibcnn::train
