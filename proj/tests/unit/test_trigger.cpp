#include <gtest/gtest.h>

#include <random>

#include "heartbeatcam/trigger.hpp"

using namespace heartbeatcam;

namespace {

HrvReading r(TimeMs t, double rmssd = 10) {
    HrvReading x;
    x.window_end_ms = t;
    x.rmssd_ms = rmssd;
    x.n_beats = 30;
    x.n_diffs = 29;
    x.mean_hr_bpm = 80;
    return x;
}

EngineState monitoring() {
    EngineState s;
    s.mode = Mode::monitoring;
    return s;
}

TriggerDecision step(EngineState& s, TimeMs t, StressState c, const TriggerConfig& cfg = {}) {
    auto d = on_reading(s, r(t), c, t, cfg);
    s = d.state;
    return d;
}

}  // namespace

TEST(Trigger, StressedFiresAndRecordsTime) {
    auto s = monitoring();
    auto d = step(s, 1000, StressState::stressed);
    ASSERT_TRUE(d.request);
    EXPECT_EQ(d.request->capture_id, 1u);
    EXPECT_EQ(d.request->at, 1000);
    EXPECT_EQ(s.last_capture_at, 1000);
    EXPECT_EQ(s.in_flight, 1u);
}

TEST(Trigger, CalmNeverFires) {
    auto s = monitoring();
    for (int i = 0; i < 100; ++i) EXPECT_FALSE(step(s, i * 1000, StressState::calm).request);
}

TEST(Trigger, RefractoryPeriod) {
    auto s = monitoring();
    ASSERT_TRUE(step(s, 0, StressState::stressed).request);
    s = on_capture_done(s, 1);
    auto d = step(s, 59'999, StressState::stressed);
    EXPECT_FALSE(d.request);
    EXPECT_EQ(d.skipped, SkipReason::rate_limited);
    EXPECT_TRUE(step(s, 60'000, StressState::stressed).request);
}

TEST(Trigger, InFlightBlocks) {
    auto s = monitoring();
    ASSERT_TRUE(step(s, 0, StressState::stressed).request);
    auto d = step(s, 70'000, StressState::stressed);
    EXPECT_FALSE(d.request);
    EXPECT_EQ(d.skipped, SkipReason::in_flight);
    s = on_capture_done(s, 1);
    EXPECT_TRUE(step(s, 71'000, StressState::stressed).request);
}

TEST(Trigger, Debounce) {
    TriggerConfig cfg;
    cfg.debounce_count = 3;
    auto s = monitoring();
    EXPECT_FALSE(step(s, 0, StressState::stressed, cfg).request);
    EXPECT_FALSE(step(s, 1, StressState::stressed, cfg).request);
    EXPECT_FALSE(step(s, 2, StressState::calm, cfg).request);
    EXPECT_FALSE(step(s, 3, StressState::stressed, cfg).request);
    EXPECT_FALSE(step(s, 4, StressState::stressed, cfg).request);
    EXPECT_TRUE(step(s, 5, StressState::stressed, cfg).request);
}

TEST(Trigger, InsufficientResetsRun) {
    TriggerConfig cfg;
    cfg.debounce_count = 2;
    auto s = monitoring();
    step(s, 0, StressState::stressed, cfg);
    s = on_insufficient(s);
    EXPECT_FALSE(step(s, 1, StressState::stressed, cfg).request);
    EXPECT_TRUE(step(s, 2, StressState::stressed, cfg).request);
}

TEST(Trigger, EdgeModeFiresOncePerRun) {
    TriggerConfig cfg;
    cfg.retrigger_while_stressed = false;
    auto s = monitoring();
    ASSERT_TRUE(step(s, 0, StressState::stressed, cfg).request);
    s = on_capture_done(s, 1);
    auto d = step(s, 120'000, StressState::stressed, cfg);
    EXPECT_FALSE(d.request);
    EXPECT_EQ(d.skipped, SkipReason::edge_hold);
    step(s, 121'000, StressState::calm, cfg);
    EXPECT_TRUE(step(s, 122'000, StressState::stressed, cfg).request);
}

TEST(Trigger, ContinuousStressTenMinutesGivesTen) {
    auto s = monitoring();
    int captures = 0;
    for (TimeMs t = 0; t < 600'000; t += 800) {
        auto d = step(s, t, StressState::stressed);
        if (d.request) {
            ++captures;
            s = on_capture_done(s, d.request->capture_id);
        }
    }
    EXPECT_EQ(captures, 10);
}

TEST(Trigger, PausedNeverFires) {
    auto s = monitoring();
    auto tap = on_tap(s);
    EXPECT_EQ(tap.effect, TapEffect::paused);
    s = tap.state;
    auto d = step(s, 0, StressState::stressed);
    EXPECT_FALSE(d.request);
    EXPECT_EQ(d.skipped, SkipReason::paused);
    tap = on_tap(s);
    EXPECT_EQ(tap.effect, TapEffect::resumed);
    s = tap.state;
    EXPECT_TRUE(step(s, 1, StressState::stressed).request);
}

TEST(Trigger, TapIgnoredWhileCalibratingOrIdle) {
    EngineState s;
    EXPECT_EQ(on_tap(s).effect, TapEffect::ignored);
    s.mode = Mode::calibrating;
    auto d = on_tap(s);
    EXPECT_EQ(d.effect, TapEffect::ignored);
    EXPECT_EQ(d.state.mode, Mode::calibrating);
}

TEST(Trigger, CalibratingNeverFires) {
    EngineState s;
    s.mode = Mode::calibrating;
    EXPECT_FALSE(step(s, 0, StressState::stressed).request);
}

TEST(Trigger, ConfigValidation) {
    TriggerConfig c;
    c.debounce_count = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.min_capture_interval_ms = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.transfer_timeout_ms = -1;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(TriggerProperty, NoTwoCapturesWithinAMinute) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        TriggerConfig cfg;
        cfg.debounce_count = 1 + rng() % 3;
        cfg.retrigger_while_stressed = rng() % 2;
        auto s = monitoring();
        std::vector<TimeMs> fired;
        TimeMs t = 0;
        for (int i = 0; i < 3000; ++i) {
            t += 300 + rng() % 1700;
            const auto c = rng() % 3 ? StressState::stressed : StressState::calm;
            auto d = step(s, t, c, cfg);
            if (d.request) {
                fired.push_back(t);
                s = on_capture_done(s, d.request->capture_id);
            }
        }
        for (std::size_t i = 1; i < fired.size(); ++i) ASSERT_GE(fired[i] - fired[i - 1], 60'000);
    }
}
