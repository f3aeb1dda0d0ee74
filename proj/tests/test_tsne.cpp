#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "vibcnn/tsne/tsne.hpp"

using namespace vibcnn;
using vibcnn::tsne::joint_probabilities;
using vibcnn::tsne::perplexity_search;
using vibcnn::tsne::silhouette;
using vibcnn::tsne::squared_distances;
using vibcnn::tsne::stratified_subsample;
using vibcnn::tsne::TsneConfig;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

double entropy_bits(const std::vector<double>& p) {
    double h = 0;
    for (double v : p)
        if (v > 0) h -= v * std::log2(v);
    return h;
}

/// Three 20-point Gaussian clusters in 10-D; centres 10 within-cluster stds apart.
std::vector<double> three_clusters(std::vector<std::uint32_t>& labels, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x;
    labels.clear();
    for (std::uint32_t c = 0; c < 3; ++c)
        for (int i = 0; i < 20; ++i) {
            for (int d = 0; d < 10; ++d) x.push_back((d == static_cast<int>(c) ? 10.0 / std::sqrt(2.0) : 0.0) + rng.normal());
            labels.push_back(c);
        }
    return x;
}

} // namespace

// ---- perplexity search

TEST(Perplexity, EqualDistancesGiveUniformRow) {
    const std::vector<double> d = {0, 4, 4, 4, 4, 4};
    const auto r = perplexity_search(d, 3.0, 0);
    EXPECT_EQ(r.p[0], 0.0);
    for (std::size_t j = 1; j < 6; ++j) EXPECT_NEAR(r.p[j], 0.2, 1e-12);
}

TEST(Perplexity, HitsTargetOnGaussianData) {
    Rng rng(3);
    const std::size_t n = 80, dim = 5;
    std::vector<double> x(n * dim);
    for (auto& v : x) v = rng.normal();
    const auto d = squared_distances(x, n, dim);
    for (double target : {2.0, 5.0, 15.0, 30.0}) {
        for (std::size_t i = 0; i < n; i += 7) {
            const auto r = perplexity_search(std::span<const double>(d).subspan(i * n, n), target, i);
            ASSERT_TRUE(r.converged);
            EXPECT_LE(r.iterations, 64u);
            EXPECT_EQ(r.p[i], 0.0);
            double sum = 0;
            for (double v : r.p) sum += v;
            EXPECT_NEAR(sum, 1.0, 1e-12);
            EXPECT_NEAR(entropy_bits(r.p), std::log2(target), 1e-5);
            EXPECT_NEAR(r.entropy_bits, entropy_bits(r.p), 1e-9);
        }
    }
}

TEST(Perplexity, TwoTightClustersKeepMassInside) {
    // (0,0),(0,.1),(.1,0) and the same shifted by 50
    const std::vector<double> x = {0, 0, 0, 0.1, 0.1, 0, 50, 50, 50, 50.1, 50.1, 50};
    const auto a = joint_probabilities(x, 6, 2, 2.0);
    double inside = 0;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            if (i / 3 == j / 3) inside += a.p[i * 6 + j];
    EXPECT_GT(inside, 0.99);
}

// ---- joint probabilities

TEST(JointP, Invariants) {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 20 + rng.below(40), dim = 1 + rng.below(8);
        std::vector<double> x(n * dim);
        for (auto& v : x) v = rng.normal(0, 1 + trial);
        const auto a = joint_probabilities(x, n, dim, 5.0);
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(a.p[i * n + i], 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_EQ(a.p[i * n + j], a.p[j * n + i]);
                if (i != j) {
                    EXPECT_GE(a.p[i * n + j], 1e-12);
                }
                sum += a.p[i * n + j];
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(JointP, DegenerateInput) {
    const std::vector<double> x(12 * 3, 1.25);
    EXPECT_EQ(code_of([&] { joint_probabilities(x, 12, 3, 3.0); }), ErrorCode::DegenerateInput);
    TsneConfig cfg;
    cfg.perplexity = 3;
    EXPECT_EQ(code_of([&] { tsne::tsne(x, 12, 3, cfg); }), ErrorCode::DegenerateInput);
}

// ---- tsne

TEST(Tsne, SeparatesThreeClusters) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<std::uint32_t> labels;
        const auto x = three_clusters(labels, 100 + seed);
        TsneConfig cfg;
        cfg.perplexity = 15;  // N = 60 caps perplexity below 19.7
        // step 200 oscillates at N = 60; 50 is the usual max(N / 48, 50) for this size
        cfg.learning_rate = 50;
        cfg.seed = seed;
        const auto r = tsne::tsne(x, 60, 10, cfg);
        ASSERT_EQ(r.y.size(), 120u);
        ASSERT_EQ(r.kl_trace.size(), 1000u);
        EXPECT_GT(silhouette(r.y, 60, 2, labels), 0.8) << "seed " << seed;

        // embedding is kept centred
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < 60; ++i) {
            mx += r.y[2 * i];
            my += r.y[2 * i + 1];
        }
        EXPECT_NEAR(mx / 60, 0.0, 1e-6);
        EXPECT_NEAR(my / 60, 0.0, 1e-6);

        // KL over the last 100 iterations never climbs by more than 1e-3 per step
        for (std::size_t t = 901; t < 1000; ++t)
            EXPECT_LE(r.kl_trace[t], r.kl_trace[t - 1] + 1e-3) << "seed " << seed << " iteration " << t;
        EXPECT_LT(r.kl_trace.back(), r.kl_trace[300]);
    }
}

TEST(Tsne, Deterministic) {
    std::vector<std::uint32_t> labels;
    const auto x = three_clusters(labels, 2);
    TsneConfig cfg;
    cfg.perplexity = 10;
    cfg.iterations = 300;
    cfg.seed = 9;
    const auto a = tsne::tsne(x, 60, 10, cfg), b = tsne::tsne(x, 60, 10, cfg);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.kl_trace, b.kl_trace);
    cfg.seed = 10;
    EXPECT_NE(tsne::tsne(x, 60, 10, cfg).y, a.y);
}

TEST(Tsne, ConfigValidation) {
    std::vector<double> x(9 * 2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    TsneConfig cfg;
    cfg.perplexity = 2;
    EXPECT_EQ(code_of([&] { tsne::tsne(x, 9, 2, cfg); }), ErrorCode::InvalidConfig);  // N < 10
    x.resize(30 * 2, 1.0);
    x[59] = 3.0;
    cfg.perplexity = 10;  // (30 - 1) / 3 = 9.67
    EXPECT_EQ(code_of([&] { tsne::tsne(x, 30, 2, cfg); }), ErrorCode::InvalidConfig);
    cfg.perplexity = 1.0;
    EXPECT_EQ(code_of([&] { tsne::tsne(x, 30, 2, cfg); }), ErrorCode::InvalidConfig);
    cfg.perplexity = 5;
    cfg.iterations = 249;
    EXPECT_EQ(code_of([&] { tsne::tsne(x, 30, 2, cfg); }), ErrorCode::InvalidConfig);
}

// ---- silhouette

TEST(Silhouette, CollapsedClustersScoreOne) {
    const std::vector<double> y = {1, 1, 1, 1, 1, 1, 5, 5, 5, 5};
    const std::vector<std::uint32_t> l = {0, 0, 0, 1, 1};
    EXPECT_EQ(silhouette(y, 5, 2, l), 1.0);
}

TEST(Silhouette, FourPointsByHand) {
    const std::vector<double> y = {0, 0, 0, 1, 10, 0, 10, 1};
    const std::vector<std::uint32_t> l = {0, 0, 1, 1};
    // every point: a = 1, b = (10 + sqrt(101)) / 2
    const double b = (10.0 + std::sqrt(101.0)) / 2.0;
    EXPECT_NEAR(silhouette(y, 4, 2, l), (b - 1.0) / b, 1e-12);
    EXPECT_NEAR(silhouette(y, 4, 2, l), 0.9, 0.01);
}

TEST(Silhouette, RandomLabelsNearZero) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const std::size_t n = 300;
        std::vector<double> y(2 * n);
        for (auto& v : y) v = rng.normal();
        std::vector<std::uint32_t> l(n);
        for (auto& v : l) v = static_cast<std::uint32_t>(rng.below(3));
        EXPECT_LT(std::abs(silhouette(y, n, 2, l)), 0.1) << "seed " << seed;
    }
}

TEST(Silhouette, SingletonsSkippedAndOneClassRejected) {
    const std::vector<double> y = {0, 0, 0, 1, 10, 0, 10, 1, 100, 100};
    const std::vector<std::uint32_t> l = {0, 0, 1, 1, 2};
    std::size_t skipped = 0;
    const double s = silhouette(y, 5, 2, l, &skipped);
    EXPECT_EQ(skipped, 1u);
    EXPECT_TRUE(std::isfinite(s));
    const std::vector<std::uint32_t> one = {4, 4, 4, 4, 4};
    EXPECT_EQ(code_of([&] { silhouette(y, 5, 2, one); }), ErrorCode::OneClassOnly);
}

TEST(Silhouette, BoundedOnRandomInput) {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + rng.below(60);
        std::vector<double> y(2 * n);
        for (auto& v : y) v = rng.normal(0, 3);
        std::vector<std::uint32_t> l(n);
        for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<std::uint32_t>(i % 2);
        const double s = silhouette(y, n, 2, l);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

// ---- subsample

TEST(Subsample, StratifiedCounts) {
    std::vector<std::uint32_t> labels;
    const std::size_t sizes[] = {1000, 300, 1700, 7};
    for (std::uint32_t c = 0; c < 4; ++c) labels.insert(labels.end(), sizes[c], c);
    const auto idx = stratified_subsample(labels, 2000, 3);
    EXPECT_EQ(idx.size(), 2000u);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
    std::map<std::uint32_t, std::size_t> got;
    for (auto i : idx) ++got[labels[i]];
    for (std::uint32_t c = 0; c < 4; ++c)
        EXPECT_LE(std::abs(static_cast<double>(got[c]) - 2000.0 * sizes[c] / 3007.0), 1.0) << "class " << c;
    EXPECT_EQ(stratified_subsample(labels, 2000, 3), idx);
    EXPECT_NE(stratified_subsample(labels, 2000, 4), idx);
}

TEST(Subsample, SmallInputUntouched) {
    const std::vector<std::uint32_t> labels = {0, 1, 0, 1, 2};
    EXPECT_EQ(stratified_subsample(labels, 2000, 0), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}
