#pragma once

// Exact O(N^2) t-SNE with a per-point perplexity search, plus the silhouette
// score used to quantify how well the embedded classes separate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/random.hpp"

namespace vibcnn::tsne {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch_iter = 250;
    bool adaptive_gains = true;
    std::size_t max_points = 2000;
    std::uint64_t seed = 0;

    void validate(std::size_t n_points) const {
        if (n_points < 10) throw Error(ErrorCode::InvalidConfig, "t-SNE needs at least 10 points, got " + std::to_string(n_points));
        if (!(perplexity > 1.0) || !(perplexity < (static_cast<double>(n_points) - 1.0) / 3.0))
            throw Error(ErrorCode::InvalidConfig, "perplexity must lie in (1, (N-1)/3) for N = " + std::to_string(n_points));
        if (iterations < 250) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 250");
        if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    }
};

struct PerplexityResult {
    double beta = 1.0;              // precision 1 / (2 sigma^2)
    std::vector<double> p;          // conditional p_{j|i}, p_{i|i} = 0
    double entropy_bits = 0.0;
    std::size_t iterations = 0;
    bool converged = false;         // false: search diverged, beta is the last boundary tried
};

inline constexpr std::size_t kNoSelf = std::numeric_limits<std::size_t>::max();

/// Bisection on beta until 2^H(p) hits the target perplexity (|H - log2 perp| < 1e-5 bits).
inline PerplexityResult perplexity_search(std::span<const double> sq_dist, double target_perplexity, std::size_t self = kNoSelf,
                                          double tol_bits = 1e-5, std::size_t max_iter = 64) {
    const std::size_t n = sq_dist.size();
    std::size_t neighbours = 0;
    double dmin = std::numeric_limits<double>::infinity();
    double dsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == self) continue;
        if (!std::isfinite(sq_dist[j])) throw Error(ErrorCode::InvalidConfig, "non-finite distance");
        ++neighbours;
        dmin = std::min(dmin, sq_dist[j]);
        dsum += sq_dist[j];
    }
    if (neighbours < 2) throw Error(ErrorCode::InvalidConfig, "perplexity search needs >= 2 neighbours");

    PerplexityResult r;
    r.p.assign(n, 0.0);
    const double target_bits = std::log2(target_perplexity);
    const double spread = dsum / static_cast<double>(neighbours) - dmin;
    r.beta = spread > 0 ? 1.0 / spread : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();

    auto evaluate = [&](double beta) {
        double sum = 0.0, weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == self) continue;
            const double shifted = sq_dist[j] - dmin;
            r.p[j] = std::exp(-beta * shifted);
            sum += r.p[j];
            weighted += shifted * r.p[j];
        }
        for (std::size_t j = 0; j < n; ++j) r.p[j] /= sum;
        return (std::log(sum) + beta * weighted / sum) / std::numbers::ln2;
    };

    for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
        r.entropy_bits = evaluate(r.beta);
        const double diff = r.entropy_bits - target_bits;
        if (std::abs(diff) < tol_bits) {
            r.converged = true;
            break;
        }
        if (diff > 0) {  // too flat: sharpen
            lo = r.beta;
            r.beta = std::isinf(hi) ? r.beta * 2.0 : 0.5 * (r.beta + hi);
        } else {
            hi = r.beta;
            r.beta = 0.5 * (r.beta + lo);
        }
    }
    if (!r.converged) r.entropy_bits = evaluate(r.beta);
    r.iterations = std::min(r.iterations, max_iter);
    return r;
}

inline std::vector<double> squared_distances(std::span<const double> x, std::size_t n, std::size_t dim) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double t = x[i * dim + k] - x[j * dim + k];
                s += t * t;
            }
            d[i * n + j] = d[j * n + i] = s;
        }
    return d;
}

struct Affinities {
    std::vector<double> p;  // N x N joint probabilities
    std::size_t unconverged_rows = 0;
};

/// p_ij = (p_{j|i} + p_{i|j}) / 2N, floored at 1e-12 off the diagonal.
inline Affinities joint_probabilities(std::span<const double> x, std::size_t n, std::size_t dim, double perplexity) {
    const auto d = squared_distances(x, n, dim);
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }))
        throw Error(ErrorCode::DegenerateInput, "all points are identical");
    Affinities a;
    std::vector<double> cond(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = perplexity_search(std::span<const double>(d).subspan(i * n, n), perplexity, i);
        a.unconverged_rows += !row.converged;
        std::copy(row.p.begin(), row.p.end(), cond.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    a.p.assign(n * n, 0.0);
    const double inv = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::max((cond[i * n + j] + cond[j * n + i]) * inv, 1e-12);
            a.p[i * n + j] = a.p[j * n + i] = v;
        }
    return a;
}

struct TsneResult {
    std::vector<double> y;          // N x 2
    std::vector<double> kl_trace;   // KL(P || Q) per iteration
    std::size_t unconverged_rows = 0;
};

inline TsneResult tsne(std::span<const double> x, std::size_t n, std::size_t dim, const TsneConfig& cfg) {
    if (dim == 0 || x.size() != n * dim) throw Error(ErrorCode::ShapeMismatch, "feature matrix shape");
    cfg.validate(n);
    const auto aff = joint_probabilities(x, n, dim, cfg.perplexity);
    const auto& p = aff.p;

    TsneResult res;
    res.unconverged_rows = aff.unconverged_rows;
    res.y.resize(n * 2);
    Rng rng(derive_seed(cfg.seed, {0x75e1u}));
    for (auto& v : res.y) v = rng.normal(0.0, 1e-2);  // covariance 1e-4 I

    std::vector<double> update(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2), num(n * n);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const double exaggeration = it < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        const double momentum = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;

        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = res.y[2 * i] - res.y[2 * j];
                const double dy = res.y[2 * i + 1] - res.y[2 * j + 1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = num[j * n + i] = v;
                z += 2.0 * v;
            }
        }

        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0, gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = std::max(num[i * n + j] / z, 1e-12);
                const double pij = p[i * n + j];
                kl += pij * std::log(pij / q);
                const double coeff = (exaggeration * pij - num[i * n + j] / z) * num[i * n + j];
                gx += coeff * (res.y[2 * i] - res.y[2 * j]);
                gy += coeff * (res.y[2 * i + 1] - res.y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        res.kl_trace.push_back(kl);

        for (std::size_t k = 0; k < n * 2; ++k) {
            if (cfg.adaptive_gains) {
                const bool same_sign = (grad[k] > 0) == (update[k] > 0);
                gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            }
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
            res.y[k] += update[k];
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += res.y[2 * i];
            my += res.y[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            res.y[2 * i] -= mx;
            res.y[2 * i + 1] -= my;
        }
    }
    return res;
}

/// Mean silhouette with Euclidean distance. Points whose class has a single
/// member are skipped and counted in `skipped`.
inline double silhouette(std::span<const double> y, std::size_t n, std::size_t dim, std::span<const std::uint32_t> labels,
                         std::size_t* skipped = nullptr) {
    if (labels.size() != n || y.size() != n * dim) throw Error(ErrorCode::ShapeMismatch, "silhouette inputs disagree in size");
    std::uint32_t max_label = 0;
    for (auto l : labels) max_label = std::max(max_label, l);
    std::vector<std::size_t> count(max_label + 1, 0);
    for (auto l : labels) ++count[l];
    const auto distinct = std::count_if(count.begin(), count.end(), [](std::size_t c) { return c > 0; });
    if (distinct < 2) throw Error(ErrorCode::OneClassOnly, "silhouette needs at least two labels");

    double total = 0.0;
    std::size_t used = 0, skip = 0;
    std::vector<double> dist_sum(count.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (count[labels[i]] < 2) {
            ++skip;
            continue;
        }
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double t = y[i * dim + k] - y[j * dim + k];
                s += t * t;
            }
            dist_sum[labels[j]] += std::sqrt(s);
        }
        const double a = dist_sum[labels[i]] / static_cast<double>(count[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < count.size(); ++c)
            if (c != labels[i] && count[c] > 0) b = std::min(b, dist_sum[c] / static_cast<double>(count[c]));
        const double denom = std::max(a, b);
        total += denom > 0 ? (b - a) / denom : 0.0;
        ++used;
    }
    if (skipped) *skipped = skip;
    return used ? total / static_cast<double>(used) : 0.0;
}

/// At most `max_points` indices, class counts proportional to the input (within one).
inline std::vector<std::size_t> stratified_subsample(std::span<const std::uint32_t> labels, std::size_t max_points, std::uint64_t seed) {
    const std::size_t n = labels.size();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (n <= max_points) return all;

    std::uint32_t max_label = 0;
    for (auto l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> members(max_label + 1);
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

    std::vector<std::size_t> quota(members.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
        const double exact = static_cast<double>(max_points) * static_cast<double>(members[c].size()) / static_cast<double>(n);
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < max_points && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];

    Rng rng(derive_seed(seed, {0x5b5u}));
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < members.size(); ++c) {
        rng.shuffle(std::span<std::size_t>(members[c]));
        out.insert(out.end(), members[c].begin(), members[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace vibcnn::tsne
