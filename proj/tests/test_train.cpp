#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "vibcnn/train/adam.hpp"
#include "vibcnn/train/checkpoint.hpp"
#include "vibcnn/train/fit.hpp"

using namespace vibcnn;
using namespace vibcnn::train;
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

template <typename F>
std::string message_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

ModelConfig toy_config(std::size_t classes = 3) {
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

/// Class k is a noisy sinusoid at its own frequency; easily separable at W=40.
pipeline::SegmentSet toy_set(std::size_t classes, std::size_t per_class, std::uint64_t seed, double noise = 0.2) {
    pipeline::SegmentSet s{{}, {}, {}, 40, 40, static_cast<std::uint32_t>(classes)};
    Rng rng(seed);
    std::vector<float> row(40);
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            const double phase = rng.uniform() * 6.283185307179586;
            for (std::size_t t = 0; t < 40; ++t)
                row[t] = static_cast<float>(std::sin(0.25 * static_cast<double>(c + 1) * static_cast<double>(t) + phase) +
                                            noise * rng.normal());
            s.push_back(row, static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c));
        }
    return s;
}

TrainConfig quick_cfg(std::size_t epochs, bool early_stop) {
    TrainConfig t;
    t.max_epochs = epochs;
    t.batch_size = 8;
    t.adam.learning_rate = 1e-2;
    t.early_stop.enabled = early_stop;
    t.seed = 3;
    return t;
}

std::vector<std::vector<float>> snapshot(std::span<const nn::Param<float>> params) {
    std::vector<std::vector<float>> out;
    for (const auto& p : params) out.emplace_back(p.value.values().begin(), p.value.values().end());
    return out;
}

} // namespace

// ---- adam

TEST(Adam, FirstStepScalar) {
    std::vector<double> theta{0.0}, g{0.5}, m{0.0}, v{0.0};
    adam_update<double>(theta, g, m, v, 1, AdamConfig{1e-3});
    EXPECT_NEAR(theta[0], -9.99999980e-4, 1e-12);
    EXPECT_DOUBLE_EQ(m[0], 0.05);
}

TEST(Adam, FirstStepBiasCorrectionIsExact) {
    // at t=1, m_hat = g and v_hat = g^2, so each step is -lr * g / (|g| + eps)
    Rng rng(9);
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    for (int i = 0; i < 200; ++i) {
        const double g0 = rng.normal(0, 3);
        std::vector<double> theta{1.0}, g{g0}, m{0.0}, v{0.0};
        adam_update<double>(theta, g, m, v, 1, cfg);
        EXPECT_NEAR(theta[0], 1.0 - cfg.learning_rate * g0 / (std::abs(g0) + cfg.epsilon), 1e-15);
    }
}

TEST(Adam, ZeroGradientLeavesParams) {
    std::vector<float> theta{1.5f, -2.0f}, g{0, 0}, m{0, 0}, v{0, 0};
    adam_update<float>(theta, g, m, v, 1, AdamConfig{});
    EXPECT_EQ(theta, (std::vector<float>{1.5f, -2.0f}));
    EXPECT_EQ(m, (std::vector<float>{0, 0}));
    EXPECT_EQ(v, (std::vector<float>{0, 0}));
}

TEST(Adam, MatchesHandOracleOverManySteps) {
    Rng rng(4);
    const AdamConfig cfg{3e-3, 0.8, 0.99, 1e-7};
    const std::size_t n = 17;
    std::vector<double> theta(n), m(n, 0), v(n, 0);
    for (auto& x : theta) x = rng.normal();
    std::vector<double> ot = theta, om(n, 0), ov(n, 0);
    for (std::uint64_t t = 1; t <= 60; ++t) {
        std::vector<double> g(n);
        for (auto& x : g) x = rng.normal(0, 0.5);
        adam_update<double>(theta, g, m, v, t, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            om[i] = 0.8 * om[i] + 0.2 * g[i];
            ov[i] = 0.99 * ov[i] + 0.01 * g[i] * g[i];
            const double mh = om[i] / (1 - std::pow(0.8, double(t)));
            const double vh = ov[i] / (1 - std::pow(0.99, double(t)));
            ot[i] -= 3e-3 * mh / (std::sqrt(vh) + 1e-7);
        }
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_NEAR(theta[i], ot[i], 1e-12);
            ASSERT_GE(v[i], 0.0);
        }
    }
}

TEST(Adam, StepCountsAndChecksShapes) {
    Model<float> model(toy_config());
    model.init_params(1);
    auto state = AdamState<float>::zeros_like(model.parameters());
    for (auto& p : model.parameters()) p.grad.fill(0.1f);
    adam_step<float>(model.parameters(), state, AdamConfig{});
    adam_step<float>(model.parameters(), state, AdamConfig{});
    EXPECT_EQ(state.t, 2u);

    AdamState<float> wrong;
    EXPECT_EQ(code_of([&] { adam_step<float>(model.parameters(), wrong, AdamConfig{}); }), ErrorCode::ShapeMismatch);
    std::vector<float> a(3), b(2), c(3), d(3);
    EXPECT_EQ(code_of([&] { adam_update<float>(a, b, c, d, 1, AdamConfig{}); }), ErrorCode::ShapeMismatch);
}

TEST(Adam, NonFiniteGradient) {
    Model<float> model(toy_config());
    model.init_params(1);
    auto state = AdamState<float>::zeros_like(model.parameters());
    model.parameter(Model<float>::dense1_w).grad.values()[7] = std::numeric_limits<float>::infinity();
    const auto before = snapshot(model.parameters());
    const auto msg = message_of([&] { adam_step<float>(model.parameters(), state, AdamConfig{}); });
    EXPECT_NE(msg.find("NonFiniteGradient"), std::string::npos);
    EXPECT_NE(msg.find("dense1.weight"), std::string::npos);
    EXPECT_EQ(state.t, 0u);
    EXPECT_EQ(snapshot(model.parameters()), before);
}

TEST(Adam, IdenticalGradientsGiveIdenticalTrajectories) {
    Rng rng(5);
    std::vector<float> a(30), b, ma(30), va(30), mb(30), vb(30);
    for (auto& x : a) x = static_cast<float>(rng.normal());
    b = a;
    for (std::uint64_t t = 1; t <= 25; ++t) {
        std::vector<float> g(30);
        for (auto& x : g) x = static_cast<float>(rng.normal());
        adam_update<float>(a, g, ma, va, t, AdamConfig{});
        adam_update<float>(b, g, mb, vb, t, AdamConfig{});
    }
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
}

TEST(Adam, ConfigValidation) {
    EXPECT_EQ(code_of([] { AdamConfig{0.0}.validate(); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { AdamConfig{1e-3, 1.0}.validate(); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { AdamConfig{1e-3, 0.9, -0.1}.validate(); }), ErrorCode::InvalidConfig);
    TrainConfig t;
    t.early_stop.val_fraction = 0.5;
    EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::InvalidConfig);
    t = {};
    t.early_stop.patience = 0;
    EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::InvalidConfig);
}

// ---- fit

TEST(Fit, EarlyStopRestoresBestEpoch) {
    const auto set = toy_set(3, 30, 1);
    Model<float> model(toy_config());
    model.init_params(7);
    const double seq[] = {1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.1, 0.1};
    std::vector<std::vector<std::vector<float>>> snaps;
    FitHooks hooks;
    hooks.val_loss_override = [&](std::size_t epoch, double) { return seq[epoch - 1]; };
    hooks.on_epoch_params = [&](std::size_t, std::span<const nn::Param<float>> p) { snaps.push_back(snapshot(p)); };
    auto cfg = quick_cfg(9, true);
    const auto r = fit(model, set, cfg, hooks);
    EXPECT_EQ(r.history.epochs.size(), 7u);
    EXPECT_EQ(r.history.best_epoch, 2u);
    EXPECT_TRUE(r.history.stopped_early);
    ASSERT_EQ(snaps.size(), 7u);
    EXPECT_NE(snaps[1], snaps[6]);
    EXPECT_EQ(snapshot(model.parameters()), snaps[1]);
}

TEST(Fit, BestEpochIsMinimumRecordedValLoss) {
    Rng rng(8);
    const auto set = toy_set(2, 25, 2);
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<double> seq(12);
        for (auto& x : seq) x = 0.5 + rng.uniform();
        Model<float> model(toy_config(2));
        model.init_params(trial);
        std::vector<std::vector<std::vector<float>>> snaps;
        FitHooks hooks;
        hooks.val_loss_override = [&](std::size_t epoch, double) { return seq[epoch - 1]; };
        hooks.on_epoch_params = [&](std::size_t, std::span<const nn::Param<float>> p) { snaps.push_back(snapshot(p)); };
        auto cfg = quick_cfg(12, true);
        cfg.early_stop.patience = 1 + rng.below(4);
        const auto r = fit(model, set, cfg, hooks);
        const auto& h = r.history;
        std::size_t argmin = 0;
        for (std::size_t e = 0; e < h.epochs.size(); ++e)
            if (h.epochs[e].val_loss < h.epochs[argmin].val_loss) argmin = e;
        EXPECT_EQ(h.best_epoch, argmin + 1);
        EXPECT_EQ(snapshot(model.parameters()), snaps[argmin]);
    }
}

TEST(Fit, DisabledEarlyStopRunsEveryEpoch) {
    const auto set = toy_set(3, 10, 1);
    Model<float> model(toy_config());
    model.init_params(7);
    const auto r = fit(model, set, quick_cfg(6, false), {});
    EXPECT_EQ(r.history.epochs.size(), 6u);
    EXPECT_FALSE(r.history.stopped_early);
    EXPECT_TRUE(std::isnan(r.history.epochs[0].val_loss));
    EXPECT_EQ(r.optimizer.t, 6u * 4);  // 30 segments in batches of 8
}

TEST(Fit, LearnsSeparableToySet) {
    // train loss falls for every seed tried
    const auto set = toy_set(3, 40, 11);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Model<float> model(toy_config());
        model.init_params(seed);
        auto cfg = quick_cfg(50, false);
        cfg.seed = seed;
        const auto r = fit(model, set, cfg, {});
        const auto& e = r.history.epochs;
        EXPECT_LT(e.back().train_loss, e.front().train_loss) << "seed " << seed;
        EXPECT_LT(e.back().train_loss, 0.05) << "seed " << seed;
        EXPECT_NEAR(evaluate_loss(model, set).accuracy, 1.0, 0.02) << "seed " << seed;
    }
}

TEST(Fit, Deterministic) {
    const auto set = toy_set(3, 20, 5);
    auto run = [&] {
        Model<float> model(toy_config());
        model.init_params(2);
        const auto r = fit(model, set, quick_cfg(8, true), {});
        std::ostringstream h;
        r.history.write_csv(h);
        return std::make_pair(h.str(), encode_checkpoint(model, &r.optimizer));
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Fit, DropoutTrainingIsDeterministic) {
    const auto set = toy_set(3, 20, 5);
    auto c = toy_config();
    c.dropout_p = 0.5;
    auto run = [&] {
        Model<float> model(c);
        model.init_params(2);
        fit(model, set, quick_cfg(3, false), {});
        return snapshot(model.parameters());
    };
    EXPECT_EQ(run(), run());
}

TEST(Fit, Errors) {
    Model<float> model(toy_config());
    model.init_params(1);
    pipeline::SegmentSet empty{{}, {}, {}, 40, 40, 3};
    EXPECT_EQ(code_of([&] { fit(model, empty, quick_cfg(1, false)); }), ErrorCode::EmptyDataset);
    auto wide = toy_set(3, 4, 1);
    wide.window_len = 20;
    EXPECT_EQ(code_of([&] { fit(model, wide, quick_cfg(1, false)); }), ErrorCode::ShapeMismatch);

    model.parameter(Model<float>::dense2_b).value.values()[0] = std::numeric_limits<float>::infinity();
    const auto msg = message_of([&] { fit(model, toy_set(3, 4, 1), quick_cfg(1, false)); });
    EXPECT_NE(msg.find("NonFiniteLoss"), std::string::npos) << msg;
    EXPECT_NE(msg.find("epoch 1 batch 1"), std::string::npos) << msg;
}

TEST(History, CsvColumns) {
    History h;
    h.epochs.push_back({1, 0.5, 0.75, 0.25, 1.0});
    std::ostringstream out;
    h.write_csv(out);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "epoch,train_loss,train_acc,val_loss,val_acc");
    EXPECT_NE(out.str().find("\n1,"), std::string::npos);
}

// ---- checkpoint

TEST(Checkpoint, RoundTripBitExact) {
    Model<float> model(toy_config());
    model.init_params(13);
    auto state = AdamState<float>::zeros_like(model.parameters());
    Rng rng(1);
    for (auto& p : model.parameters())
        for (auto& g : p.grad.values()) g = static_cast<float>(rng.normal());
    adam_step<float>(model.parameters(), state, AdamConfig{});

    const auto bytes = encode_checkpoint(model, &state, {"a", "b", "c"});
    const auto ck = decode_checkpoint(bytes, toy_config());
    EXPECT_EQ(ck.model.config(), model.config());
    EXPECT_EQ(snapshot(ck.model.parameters()), snapshot(model.parameters()));
    ASSERT_TRUE(ck.optimizer.has_value());
    EXPECT_EQ(*ck.optimizer, state);
    EXPECT_EQ(ck.class_names, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(encode_checkpoint(ck.model, &*ck.optimizer, ck.class_names), bytes);

    const auto bare = decode_checkpoint(encode_checkpoint(model, nullptr));
    EXPECT_FALSE(bare.optimizer.has_value());
}

TEST(Checkpoint, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "vibcnn_test_ckpt.vfck";
    Model<float> model(toy_config());
    model.init_params(2);
    save_checkpoint(model, nullptr, path);
    const auto ck = load_checkpoint(path);
    EXPECT_EQ(snapshot(ck.model.parameters()), snapshot(model.parameters()));
    std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderAndLayout) {
    Model<float> model(toy_config());
    const auto bytes = encode_checkpoint(model, nullptr);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VFCK");
    EXPECT_EQ(bytes[4], 1);
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 4);
    const std::string header(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    EXPECT_NE(header.find("window_len=40\n"), std::string::npos);
    EXPECT_NE(header.find("class_count=3\n"), std::string::npos);
    EXPECT_NE(header.find("dropout_p="), std::string::npos);
    EXPECT_NE(header.find("layers="), std::string::npos);
    EXPECT_EQ(bytes.size(), 12 + hlen + 4 * model.parameter_count() + 1);
}

TEST(Checkpoint, Errors) {
    Model<float> model(toy_config());
    model.init_params(3);
    const auto bytes = encode_checkpoint(model, nullptr);
    auto bad = bytes;
    bad[1] = 'X';
    EXPECT_EQ(code_of([&] { decode_checkpoint(bad); }), ErrorCode::BadMagic);
    auto ver = bytes;
    ver[4] = 2;
    EXPECT_EQ(code_of([&] { decode_checkpoint(ver); }), ErrorCode::VersionUnsupported);
    auto cut = bytes;
    cut.pop_back();
    EXPECT_EQ(code_of([&] { decode_checkpoint(cut); }), ErrorCode::TruncatedFile);
}

TEST(Checkpoint, WindowMismatchNamesLayer) {
    ModelConfig small;
    small.window_len = 500;
    small.class_count = 4;
    Model<float> model(small);
    const auto bytes = encode_checkpoint(model, nullptr);
    ModelConfig big = small;
    big.window_len = 1200;
    const auto msg = message_of([&] { decode_checkpoint(bytes, big); });
    EXPECT_NE(msg.find("ShapeMismatch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dense1"), std::string::npos) << msg;
}
