#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vibcnn/eval/metrics.hpp"

using namespace vibcnn;
using namespace vibcnn::eval;
using nn::Model;
using nn::ModelConfig;

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

ModelConfig toy_config(std::size_t classes = 4) {
    ModelConfig c;
    c.window_len = 40;
    c.class_count = classes;
    c.conv1_filters = 4;
    c.conv1_kernel = 8;
    c.conv2_filters = 3;
    c.conv2_kernel = 5;
    c.pool_size = 2;
    c.pool_stride = 2;
    c.dense_hidden = 6;
    return c;
}

pipeline::SegmentSet random_set(std::size_t n, std::size_t classes, std::uint64_t seed) {
    pipeline::SegmentSet s{{}, {}, {}, 40, 40, static_cast<std::uint32_t>(classes)};
    Rng rng(seed);
    std::vector<float> row(40);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : row) v = static_cast<float>(rng.normal());
        s.push_back(row, static_cast<std::uint32_t>(i % classes), static_cast<std::uint32_t>(i / 3));
    }
    return s;
}

} // namespace

TEST(Confusion, Perfect) {
    const std::vector<std::uint32_t> y = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const auto e = confusion(y, y, 2);
    EXPECT_EQ(e.confusion.counts, (std::vector<std::uint64_t>{5, 0, 0, 5}));
    EXPECT_EQ(e.metrics.overall_accuracy, 1.0);
}

TEST(Confusion, HandCount) {
    const std::vector<std::uint32_t> t = {0, 0, 1, 1}, p = {0, 1, 1, 1};
    const auto e = confusion(t, p, 2);
    EXPECT_EQ(e.confusion.counts, (std::vector<std::uint64_t>{1, 1, 0, 2}));
    EXPECT_EQ(e.metrics.overall_accuracy, 0.75);
    EXPECT_EQ(e.metrics.per_class_recall, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(e.metrics.macro_recall, 0.75);
}

TEST(Confusion, Errors) {
    const std::vector<std::uint32_t> none;
    EXPECT_EQ(code_of([&] { confusion(none, none, 3); }), ErrorCode::UndefinedOnEmpty);
    const std::vector<std::uint32_t> a = {0, 1}, b = {0};
    EXPECT_EQ(code_of([&] { confusion(a, b, 2); }), ErrorCode::LengthMismatch);
    const std::vector<std::uint32_t> c = {0, 2};
    EXPECT_EQ(code_of([&] { confusion(a, c, 2); }), ErrorCode::LabelOutOfRange);
    EXPECT_EQ(code_of([&] { confusion(c, a, 2); }), ErrorCode::LabelOutOfRange);
}

TEST(Confusion, UnsupportedClassRecallIsNaN) {
    const std::vector<std::uint32_t> t = {0, 0, 2}, p = {0, 1, 2};
    const auto e = confusion(t, p, 3);
    EXPECT_TRUE(std::isnan(e.metrics.per_class_recall[1]));
    EXPECT_DOUBLE_EQ(e.metrics.macro_recall, 0.75);
}

TEST(Confusion, InvariantsOnRandomPairs) {
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 2 + rng.below(8), n = 1 + rng.below(300);
        std::vector<std::uint32_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<std::uint32_t>(rng.below(c));
            p[i] = rng.uniform() < 0.6 ? t[i] : static_cast<std::uint32_t>(rng.below(c));
        }
        const auto e = confusion(t, p, c);
        EXPECT_EQ(e.confusion.total(), n);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) hits += t[i] == p[i];
        EXPECT_EQ(e.confusion.trace(), hits);
        EXPECT_EQ(e.metrics.overall_accuracy, static_cast<double>(hits) / static_cast<double>(n));
        for (std::size_t k = 0; k < c; ++k)
            EXPECT_EQ(e.confusion.support(k), static_cast<std::uint64_t>(std::count(t.begin(), t.end(), k)));

        // jointly permuting pairs leaves the matrix alone
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(std::span<std::size_t>(perm));
        std::vector<std::uint32_t> t2(n), p2(n);
        for (std::size_t i = 0; i < n; ++i) {
            t2[i] = t[perm[i]];
            p2[i] = p[perm[i]];
        }
        EXPECT_EQ(confusion(t2, p2, c).confusion, e.confusion);
    }
}

TEST(Confusion, CsvAndReport) {
    const std::vector<std::uint32_t> t = {0, 0, 1, 1}, p = {0, 1, 1, 1};
    const auto e = confusion(t, p, 2, {"N", "IR"});
    std::ostringstream csv, rep;
    e.confusion.write_csv(csv);
    EXPECT_EQ(csv.str(), "N,IR\n1,1\n0,2\n");
    e.metrics.write_report(rep, e.confusion.class_names);
    EXPECT_NE(rep.str().find("overall_accuracy=0.75\n"), std::string::npos);
    EXPECT_NE(rep.str().find("recall.N=0.5\n"), std::string::npos);
    EXPECT_NE(rep.str().find("recall.IR=1\n"), std::string::npos);
}

TEST(Argmax, TiesGoLow) {
    const float a[] = {1, 3, 3, 2};
    EXPECT_EQ(argmax<float>(a), 1u);
    const float z[] = {0, 0, 0};
    EXPECT_EQ(argmax<float>(z), 0u);
}

TEST(Predict, BiasOnlyModelPicksBiasedClass) {
    Model<float> model(toy_config());
    model.parameter(Model<float>::dense2_b).value.values()[3] = 1.0f;
    const auto set = random_set(20, 4, 1);
    for (auto p : predict(model, set)) EXPECT_EQ(p, 3u);
}

TEST(Predict, ZeroModelTiesToClassZero) {
    Model<float> model(toy_config());
    for (auto p : predict(model, random_set(9, 4, 2))) EXPECT_EQ(p, 0u);
}

TEST(Predict, InvariantToChunking) {
    Model<float> model(toy_config());
    model.init_params(4);
    const auto set = random_set(37, 4, 3);
    const auto a = predict(model, set, 1);
    EXPECT_EQ(predict(model, set, 5), a);
    EXPECT_EQ(predict(model, set, 64), a);
}

TEST(Predict, ShapeMismatch) {
    Model<float> model(toy_config());
    auto set = random_set(4, 4, 3);
    set.window_len = 20;
    EXPECT_EQ(code_of([&] { predict(model, set); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { extract_features(model, set); }), ErrorCode::ShapeMismatch);
}

TEST(Features, ShapeAndZeroModel) {
    Model<float> model(toy_config());
    const auto set = random_set(11, 4, 5);
    const auto f = extract_features(model, set);
    EXPECT_EQ(f.shape(), (std::vector<std::size_t>{11, 6}));
    for (float v : f.values()) EXPECT_EQ(v, 0.0f);

    ModelConfig full;
    full.class_count = 4;
    Model<float> big(full);
    pipeline::SegmentSet one{std::vector<float>(500, 0.5f), {0}, {0}, 500, 300, 4};
    EXPECT_EQ(extract_features(big, one).shape(), (std::vector<std::size_t>{1, 100}));
}

TEST(Features, DuplicatedSegmentsGiveIdenticalRows) {
    Model<float> model(toy_config());
    model.init_params(6);
    auto set = random_set(3, 4, 6);
    const std::vector<float> row(set.row(1).begin(), set.row(1).end());
    set.push_back(row, 1, 0);
    const auto f = extract_features(model, set);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(f.values()[1 * 6 + j], f.values()[3 * 6 + j]);
}

TEST(Features, HeadOfFeaturesMatchesPredict) {
    ModelConfig c = toy_config();
    c.dropout_p = 0.4;  // inference must ignore it
    Model<float> model(c);
    model.init_params(8);
    const auto set = random_set(50, 4, 7);
    const auto f = extract_features(model, set);
    const auto pred = predict(model, set);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto logits = model.head(f.values().subspan(i * 6, 6));
        EXPECT_EQ(argmax<float>(logits), pred[i]);
    }
}

TEST(RecordVote, MajorityPerRecord) {
    pipeline::SegmentSet set{{}, {}, {}, 1, 1, 3};
    const float v = 0;
    const std::uint32_t rec[] = {0, 0, 0, 1, 1, 2, 2};
    const std::uint32_t lab[] = {0, 0, 0, 1, 1, 2, 2};
    for (int i = 0; i < 7; ++i) set.push_back(std::span<const float>(&v, 1), lab[i], rec[i]);
    const std::vector<std::uint32_t> pred = {0, 1, 0, 2, 1, 2, 0};
    const auto e = record_vote(set, pred, 3);
    // record 0 -> 0, record 1 ties 1/2 -> 1, record 2 ties 0/2 -> 0
    EXPECT_EQ(e.confusion.total(), 3u);
    EXPECT_EQ(e.confusion.at(0, 0), 1u);
    EXPECT_EQ(e.confusion.at(1, 1), 1u);
    EXPECT_EQ(e.confusion.at(2, 0), 1u);
    EXPECT_NEAR(e.metrics.overall_accuracy, 2.0 / 3.0, 1e-15);
    EXPECT_EQ(code_of([&] { record_vote(set, std::vector<std::uint32_t>{0}, 3); }), ErrorCode::LengthMismatch);
}
