#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "heartbeatcam/hrv.hpp"
#include "heartbeatcam/rng.hpp"
#include "heartbeatcam/scenario.hpp"

namespace heartbeatcam {

/// Shape of the resting variability model. Exposed for tests; scenarios only
/// set the mean and jitter scale.
struct RrModel {
    double step_spread = 0.10;       // step magnitude ~ jitter * U(1 - s, 1 + s)
    double burst_start_per_beat = 1.0 / 150.0;
    int burst_min_beats = 12;
    int burst_max_beats = 25;
    double burst_gain_lo = 1.8;
    double burst_gain_hi = 2.6;
    double reversion_beats = 6.0;    // pull toward the target mean, in jitter units
};

/// Watch-side RR stream: a clipped random walk around the (episode-adjusted)
/// mean with fixed-scale successive steps and occasional higher-variability
/// bursts, so resting RMSSD stays near rr_jitter with an upper tail only.
///
/// Inside a stress episode the target mean RR drops so that heart rate rises
/// by hr_increase_pct, and the step scale shrinks by jitter_suppression_pct.
/// Intervals are whole milliseconds; beat i ends at t = sum of rr[0..i].
class RrGenerator {
public:
    explicit RrGenerator(const Scenario& scenario, RrModel model = {})
        : scenario_(scenario), model_(model), rng_(scenario.seed, 0x5252), x_(scenario.rr_mean_ms) {}

    std::optional<RrSample> next() {
        const double target = target_rr(t_);
        const double scale = step_scale(t_);

        if (burst_left_ > 0) {
            --burst_left_;
        } else if (rng_.chance(model_.burst_start_per_beat)) {
            burst_left_ = static_cast<int>(rng_.uniform_int(model_.burst_min_beats, model_.burst_max_beats));
            burst_gain_ = rng_.uniform(model_.burst_gain_lo, model_.burst_gain_hi);
        }
        const double gain = burst_left_ > 0 ? burst_gain_ : 1.0;
        const double magnitude = scenario_.rr_jitter_ms * scale * gain *
                                 rng_.uniform(1.0 - model_.step_spread, 1.0 + model_.step_spread);

        const double pull = scenario_.rr_jitter_ms > 0
                                ? (target - x_) / (model_.reversion_beats * scenario_.rr_jitter_ms)
                                : 0.0;
        const double p_up = std::clamp(0.5 + pull, 0.02, 0.98);
        double step = rng_.chance(p_up) ? magnitude : -magnitude;
        if (scenario_.rr_jitter_ms <= 0) step = std::clamp(target - x_, -20.0, 20.0);
        x_ = std::clamp(x_ + step, 300.0, 2000.0);

        const double rr = std::round(x_);
        const TimeMs t = t_ + static_cast<TimeMs>(rr);
        if (t > scenario_.duration_ms()) return std::nullopt;
        t_ = t;
        return RrSample{t, rr, ++seq_};
    }

    double target_rr(TimeMs t) const {
        double rr = scenario_.rr_mean_ms;
        if (const auto* e = episode_at(t)) rr /= 1.0 + e->hr_increase_pct / 100.0;
        return rr;
    }

    double step_scale(TimeMs t) const {
        if (const auto* e = episode_at(t)) return 1.0 - e->jitter_suppression_pct / 100.0;
        return 1.0;
    }

private:
    const Episode* episode_at(TimeMs t) const {
        for (const auto& e : scenario_.episodes) {
            const auto start = static_cast<TimeMs>(std::llround(e.start_s * 1000.0));
            const auto end = static_cast<TimeMs>(std::llround((e.start_s + e.duration_s) * 1000.0));
            if (t >= start && t < end) return &e;
        }
        return nullptr;
    }

    Scenario scenario_;
    RrModel model_;
    Rng rng_;
    double x_;
    TimeMs t_ = 0;
    std::uint64_t seq_ = 0;
    int burst_left_ = 0;
    double burst_gain_ = 1.0;
};

inline std::vector<RrSample> generate_rr(const Scenario& scenario, RrModel model = {}) {
    RrGenerator gen(scenario, model);
    std::vector<RrSample> out;
    while (auto s = gen.next()) out.push_back(*s);
    return out;
}

}  // namespace heartbeatcam
