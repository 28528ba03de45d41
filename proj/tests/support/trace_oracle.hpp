#pragma once

// Predicts capture times for a fault-free scenario straight from the RR trace,
// using the naive reference RMSSD and a hand-written trigger rule. Only the
// trace generator is shared with the library.

#include <cstdint>
#include <optional>
#include <vector>

#include "heartbeatcam/rr_generator.hpp"
#include "oracles.hpp"

namespace oracle {

struct TracePrediction {
    double baseline_mean = 0;
    double baseline_sd = 0;
    double threshold = 0;
    std::size_t calibration_readings = 0;
    std::vector<std::int64_t> captures;  // engine-side times (arrival of the triggering beat)
};

struct TraceRules {
    std::int64_t calibration_ms = 7LL * 24 * 3600 * 1000;
    std::size_t min_samples = 100;
    double k = 1.5;
    std::int64_t latency_ms = 5;
    std::int64_t refractory_ms = 60'000;
};

inline TracePrediction predict_captures(const heartbeatcam::Scenario& scenario, const TraceRules& rules = {}) {
    heartbeatcam::RrGenerator gen(scenario);
    std::vector<Beat> beats;
    while (auto s = gen.next()) beats.push_back({s->t_ms, s->rr_ms, s->seq});

    std::vector<std::int64_t> taps;
    for (double s : scenario.taps_s) taps.push_back(static_cast<std::int64_t>(std::llround(s * 1000.0)) + rules.latency_ms);

    TracePrediction out;
    std::vector<double> calibration;
    bool calibrated = false;
    std::optional<std::int64_t> first_t, last_capture;
    std::size_t lo = 0, next_tap = 0;
    bool paused = false;

    for (std::size_t i = 0; i < beats.size(); ++i) {
        const auto end = beats[i].t;
        const auto arrival = end + rules.latency_ms;
        while (next_tap < taps.size() && taps[next_tap] < arrival) {
            if (calibrated) paused = !paused;
            ++next_tap;
        }
        if (!first_t) first_t = end;
        while (beats[lo].t <= end - 25000) ++lo;
        const std::vector<Beat> window(beats.begin() + static_cast<std::ptrdiff_t>(lo),
                                       beats.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        const auto r = rmssd(window, end);
        if (!calibrated) {
            if (!r) continue;
            if (end - *first_t >= rules.calibration_ms && calibration.size() >= rules.min_samples) {
                out.baseline_mean = mean(calibration);
                out.baseline_sd = sample_sd(calibration);
                out.threshold = out.baseline_mean - rules.k * out.baseline_sd;
                out.calibration_readings = calibration.size();
                calibrated = true;
            } else {
                calibration.push_back(r->rmssd);
                continue;
            }
        }
        if (!r || paused || !(r->rmssd < out.threshold)) continue;
        if (last_capture && arrival - *last_capture < rules.refractory_ms) continue;
        out.captures.push_back(arrival);
        last_capture = arrival;
    }
    return out;
}

}  // namespace oracle
