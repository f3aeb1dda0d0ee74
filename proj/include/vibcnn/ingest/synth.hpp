#pragma once

// Synthetic bearing vibration: a shaft-rate sinusoid plus, for faulty
// bearings, a train of decaying resonance bursts repeating at the
// kinematic fault frequency.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"
#include "vibcnn/ingest/signal.hpp"
#include "vibcnn/random.hpp"

namespace vibcnn::ingest {

enum class FaultKind { healthy, inner, outer, ball };

inline const char* to_string(FaultKind k) {
    switch (k) {
    case FaultKind::healthy: return "healthy";
    case FaultKind::inner: return "inner";
    case FaultKind::outer: return "outer";
    case FaultKind::ball: return "ball";
    }
    return "?";
}

struct BearingGeometry {
    // CWRU drive-end bearing (SKF 6205-2RS JEM), inches
    int n_balls = 9;
    double ball_diam = 0.3126;
    double pitch_diam = 1.537;
    double contact_angle_deg = 0.0;
};

struct SynthConfig {
    FaultKind fault_kind = FaultKind::healthy;
    double sample_rate_hz = 12000.0;
    double duration_s = 1.0;
    double shaft_rpm = 1797.0;
    BearingGeometry geometry;
    double baseline_amplitude = 1.0;
    double impulse_amplitude = 3.0;
    double resonance_hz = 3000.0;
    double decay_rate = 800.0;  // 1/s
    double noise_std = 0.1;
    double jitter = 0.02;       // relative, uniform
    std::uint64_t seed = 0;

    void validate() const {
        if (!(geometry.ball_diam < geometry.pitch_diam)) throw Error(ErrorCode::InvalidConfig, "ball_diam must be < pitch_diam");
        if (!(duration_s > 0)) throw Error(ErrorCode::InvalidConfig, "duration_s must be > 0");
        if (!(noise_std >= 0)) throw Error(ErrorCode::InvalidConfig, "noise_std must be >= 0");
        if (!(sample_rate_hz > 0)) throw Error(ErrorCode::InvalidConfig, "sample_rate_hz must be > 0");
        if (!(shaft_rpm > 0)) throw Error(ErrorCode::InvalidConfig, "shaft_rpm must be > 0");
        if (geometry.n_balls < 1) throw Error(ErrorCode::InvalidConfig, "n_balls must be >= 1");
        if (!(decay_rate > 0)) throw Error(ErrorCode::InvalidConfig, "decay_rate must be > 0");
    }
};

inline double shaft_hz(const SynthConfig& c) { return c.shaft_rpm / 60.0; }

inline double bpfo(const SynthConfig& c) {
    const auto& g = c.geometry;
    const double ratio = g.ball_diam / g.pitch_diam * std::cos(g.contact_angle_deg * std::numbers::pi / 180.0);
    return g.n_balls / 2.0 * shaft_hz(c) * (1.0 - ratio);
}

inline double bpfi(const SynthConfig& c) {
    const auto& g = c.geometry;
    const double ratio = g.ball_diam / g.pitch_diam * std::cos(g.contact_angle_deg * std::numbers::pi / 180.0);
    return g.n_balls / 2.0 * shaft_hz(c) * (1.0 + ratio);
}

inline double bsf(const SynthConfig& c) {
    const auto& g = c.geometry;
    const double ratio = g.ball_diam / g.pitch_diam * std::cos(g.contact_angle_deg * std::numbers::pi / 180.0);
    return g.pitch_diam / (2.0 * g.ball_diam) * shaft_hz(c) * (1.0 - ratio * ratio);
}

inline double fault_frequency(const SynthConfig& c) {
    switch (c.fault_kind) {
    case FaultKind::inner: return bpfi(c);
    case FaultKind::outer: return bpfo(c);
    case FaultKind::ball: return bsf(c);
    case FaultKind::healthy: break;
    }
    return 0.0;
}

inline Signal synth_signal(const SynthConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
    if (n == 0) throw Error(ErrorCode::InvalidConfig, "duration too short for one sample");

    Signal s;
    s.sample_rate_hz = cfg.sample_rate_hz;
    s.source_id = std::string("synthetic_") + to_string(cfg.fault_kind);
    s.samples.resize(n);

    const double dt = 1.0 / cfg.sample_rate_hz;
    const double fr = shaft_hz(cfg);
    const double two_pi = 2.0 * std::numbers::pi;

    Rng phase_rng(derive_seed(cfg.seed, {1}));
    const double phase = phase_rng.uniform(0.0, two_pi);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] = cfg.baseline_amplitude * std::sin(two_pi * fr * static_cast<double>(i) * dt + phase);

    if (cfg.fault_kind != FaultKind::healthy) {
        const double period = 1.0 / fault_frequency(cfg);
        const double ring_time = std::log(1e7) / cfg.decay_rate;  // amplitude below 1e-7
        const double end_time = static_cast<double>(n) * dt;
        Rng jitter_rng(derive_seed(cfg.seed, {2}));
        double onset = jitter_rng.uniform(0.0, period);
        while (onset < end_time) {
            const auto first = static_cast<std::size_t>(std::ceil(onset / dt));
            const auto last = std::min(n, static_cast<std::size_t>(std::ceil((onset + ring_time) / dt)));
            for (std::size_t i = first; i < last; ++i) {
                const double tau = static_cast<double>(i) * dt - onset;
                s.samples[i] += cfg.impulse_amplitude * std::exp(-cfg.decay_rate * tau) * std::sin(two_pi * cfg.resonance_hz * tau);
            }
            onset += period * (1.0 + jitter_rng.uniform(-cfg.jitter, cfg.jitter));
        }
    }

    if (cfg.noise_std > 0) {
        Rng noise_rng(derive_seed(cfg.seed, {3}));
        for (auto& v : s.samples) v += cfg.noise_std * noise_rng.normal();
    }
    return s;
}

struct SyntheticDatasetConfig {
    std::size_t windows_per_class = 200;
    std::size_t window_len = 500;
    std::size_t stride = 300;
    double sample_rate_hz = 12000.0;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

/// One record per class in catalog_synthetic() order (healthy, inner, outer,
/// ball), each long enough for exactly `windows_per_class` windows. Fault kinds
/// ring at different resonances, as distinct fault locations excite
/// different structural paths.
inline std::vector<Signal> synthetic_dataset(const SyntheticDatasetConfig& d) {
    if (d.windows_per_class == 0) throw Error(ErrorCode::InvalidConfig, "windows_per_class must be >= 1");
    if (d.window_len == 0 || d.stride == 0) throw Error(ErrorCode::InvalidConfig, "window_len and stride must be >= 1");
    const std::size_t length = d.window_len + (d.windows_per_class - 1) * d.stride;
    constexpr FaultKind kinds[] = {FaultKind::healthy, FaultKind::inner, FaultKind::outer, FaultKind::ball};
    constexpr double resonance[] = {3000.0, 4000.0, 3000.0, 2500.0};
    std::vector<Signal> out;
    for (std::size_t k = 0; k < 4; ++k) {
        SynthConfig c;
        c.fault_kind = kinds[k];
        c.sample_rate_hz = d.sample_rate_hz;
        c.duration_s = static_cast<double>(length) / d.sample_rate_hz;
        c.resonance_hz = resonance[k];
        c.noise_std = d.noise_std;
        c.seed = derive_seed(d.seed, {0x5e7u, k});
        auto s = synth_signal(c);
        s.samples.resize(length);
        s.class_label = static_cast<int>(k);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace vibcnn::ingest
