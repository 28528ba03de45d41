#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "heartbeatcam/hrv.hpp"

using namespace heartbeatcam;

namespace {

std::vector<RrSample> consecutive(const std::vector<double>& rr, TimeMs t0 = 0) {
    std::vector<RrSample> out;
    TimeMs t = t0;
    for (std::size_t i = 0; i < rr.size(); ++i) {
        t += static_cast<TimeMs>(rr[i]);
        out.push_back({t, rr[i], i});
    }
    return out;
}

std::vector<oracle::Beat> as_beats(const std::vector<RrSample>& v) {
    std::vector<oracle::Beat> out;
    for (const auto& s : v) out.push_back({s.t_ms, s.rr_ms, s.seq});
    return out;
}

HrvReading reading_of(double rmssd) {
    HrvReading r;
    r.rmssd_ms = rmssd;
    r.n_beats = 20;
    r.n_diffs = 19;
    return r;
}

}  // namespace

TEST(ValidateRr, MidRangeAccepted) { EXPECT_TRUE(accepted(validate_rr({0, 800, 0}))); }

TEST(ValidateRr, BelowRangeRejected) {
    auto v = validate_rr({0, 250, 0});
    ASSERT_FALSE(accepted(v));
    EXPECT_EQ(std::get<Rejection>(v).reason, RejectReason::out_of_range);
}

TEST(ValidateRr, BoundsInclusive) {
    EXPECT_TRUE(accepted(validate_rr({0, 2000, 0})));
    EXPECT_TRUE(accepted(validate_rr({0, 300, 0})));
    EXPECT_FALSE(accepted(validate_rr({0, 299.999, 0})));
    EXPECT_FALSE(accepted(validate_rr({0, 2000.001, 0})));
    EXPECT_FALSE(accepted(validate_rr({0, std::nan(""), 0})));
}

TEST(WindowRmssd, ConstantSeriesIsZero) {
    auto s = consecutive(std::vector<double>(20, 800));
    auto r = window_rmssd(s, s.back().t_ms);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->rmssd_ms, 0.0);
    EXPECT_EQ(r->n_beats, 20u);
    EXPECT_EQ(r->n_diffs, 19u);
    EXPECT_DOUBLE_EQ(r->mean_hr_bpm, 75.0);
}

TEST(WindowRmssd, AlternatingSeriesMatchesOracle) {
    std::vector<double> rr;
    for (int i = 0; i < 20; ++i) rr.push_back(i % 2 ? 850 : 800);
    auto s = consecutive(rr);
    auto r = window_rmssd(s, s.back().t_ms);
    auto o = oracle::rmssd(as_beats(s), s.back().t_ms);
    ASSERT_TRUE(r && o);
    EXPECT_NEAR(r->rmssd_ms, 50.0, 1e-12);
    EXPECT_NEAR(r->rmssd_ms, o->rmssd, 1e-12);
}

TEST(WindowRmssd, FiveBeatsInsufficient) {
    auto s = consecutive(std::vector<double>(5, 800));
    EXPECT_FALSE(window_rmssd(s, s.back().t_ms));
}

TEST(WindowRmssd, WindowIsHalfOpenOnTheLeft) {
    // 26 beats of 1000 ms at t=1000..26000; window ending at 26000 excludes t=1000.
    auto s = consecutive(std::vector<double>(26, 1000));
    auto r = window_rmssd(s, 26000);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->n_beats, 25u);
}

TEST(WindowRmssd, NoAdjacentPairIsInsufficient) {
    std::vector<RrSample> s;
    for (std::uint64_t i = 0; i < 12; ++i) s.push_back({static_cast<TimeMs>(i * 800 + 800), 800, i * 2});
    EXPECT_FALSE(window_rmssd(s, s.back().t_ms));
}

TEST(RmssdStream, RejectedSampleRemovesExactlyOnePair) {
    std::vector<double> rr = {800, 810, 790, 805, 815, 800, 820, 795, 810, 800, 805, 790};
    auto clean = consecutive(rr);
    // Same stream with an artifact inserted after beat 5 (seq shifted by one).
    std::vector<RrSample> dirty;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        auto s = clean[i];
        s.seq = i < 6 ? i : i + 1;
        dirty.push_back(s);
        if (i == 5) dirty.push_back({s.t_ms, 250, 6});
    }
    RmssdStream a, b;
    std::optional<HrvReading> ra, rb;
    for (const auto& s : clean) ra = a.push(s).reading;
    for (const auto& s : dirty) rb = b.push(s).reading;
    ASSERT_TRUE(ra && rb);
    EXPECT_EQ(b.rejected_count(), 1u);
    EXPECT_EQ(rb->n_beats, ra->n_beats);
    EXPECT_EQ(rb->n_diffs + 1, ra->n_diffs);

    double removed = rr[6] - rr[5];
    double sq = ra->rmssd_ms * ra->rmssd_ms * ra->n_diffs - removed * removed;
    EXPECT_NEAR(rb->rmssd_ms, std::sqrt(sq / rb->n_diffs), 1e-9);
}

TEST(RmssdStream, RejectsNonIncreasingSeq) {
    RmssdStream s;
    s.push({800, 800, 5});
    EXPECT_THROW(s.push({1600, 800, 5}), ValidationError);
}

TEST(RmssdStream, RejectsBackwardTime) {
    RmssdStream s;
    s.push({800, 800, 1});
    try {
        s.push({700, 800, 2});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "t_ms");
    }
}

TEST(RmssdStream, EqualsOracleOnRandomStreams) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto beats = oracle::random_stream(rng, 10 + rng() % 191);
        RmssdStream stream;
        for (const auto& b : beats) {
            auto res = stream.push({b.t, b.rr, b.seq});
            if (!res.accepted) continue;
            auto o = oracle::rmssd(beats, b.t);
            ASSERT_EQ(res.reading.has_value(), o.has_value()) << "trial " << trial << " t=" << b.t;
            if (!o) continue;
            EXPECT_NEAR(res.reading->rmssd_ms, o->rmssd, 1e-9);
            EXPECT_EQ(res.reading->n_beats, o->n_beats);
            EXPECT_EQ(res.reading->n_diffs, o->n_diffs);
            EXPECT_NEAR(res.reading->mean_hr_bpm, o->mean_hr, 1e-9);
        }
    }
}

TEST(RmssdStream, EqualsBatchWindow) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const auto beats = oracle::random_stream(rng, 150);
        RmssdStream stream;
        std::vector<RrSample> accepted_so_far;
        for (const auto& b : beats) {
            auto res = stream.push({b.t, b.rr, b.seq});
            if (!res.accepted) continue;
            accepted_so_far.push_back({b.t, b.rr, b.seq});
            auto batch = window_rmssd(accepted_so_far, b.t);
            ASSERT_EQ(batch.has_value(), res.reading.has_value());
            if (batch) EXPECT_NEAR(batch->rmssd_ms, res.reading->rmssd_ms, 1e-9);
        }
    }
}

TEST(RmssdStream, LongStreamDoesNotDrift) {
    // Alternating noisy and perfectly flat stretches; flat windows must read 0.
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(300, 2000);
    RmssdStream stream;
    std::vector<oracle::Beat> recent;
    TimeMs t = 0;
    std::uint64_t seq = 0;
    for (int block = 0; block < 400; ++block) {
        const bool flat = block % 2;
        for (int i = 0; i < 120; ++i) {
            const double rr = flat ? 1000.0 : u(rng);
            t += static_cast<TimeMs>(rr);
            const oracle::Beat b{t, rr, seq++};
            recent.push_back(b);
            if (recent.size() > 200) recent.erase(recent.begin());
            auto res = stream.push({b.t, b.rr, b.seq});
            auto o = oracle::rmssd(recent, t);
            ASSERT_EQ(res.reading.has_value(), o.has_value());
            if (o) ASSERT_NEAR(res.reading->rmssd_ms, o->rmssd, 1e-9) << "block " << block << " i " << i;
        }
    }
}

TEST(RmssdProperties, TranslationScalingAndBound) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(400, 1200);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> rr(10 + rng() % 20);
        for (auto& v : rr) v = u(rng);
        auto base = consecutive(rr);
        auto r = window_rmssd(base, base.back().t_ms);
        ASSERT_TRUE(r);

        auto shifted = base;
        for (auto& s : shifted) s.rr_ms += 123.0;
        auto rs = window_rmssd(shifted, base.back().t_ms);
        EXPECT_NEAR(rs->rmssd_ms, r->rmssd_ms, 1e-9);

        auto scaled = base;
        for (auto& s : scaled) s.rr_ms *= 1.5;
        auto rk = window_rmssd(scaled, base.back().t_ms);
        EXPECT_NEAR(rk->rmssd_ms, 1.5 * r->rmssd_ms, 1e-9);
        EXPECT_NEAR(rk->mean_hr_bpm, r->mean_hr_bpm / 1.5, 1e-9);

        double max_d = 0;
        for (std::size_t i = 1; i < rr.size(); ++i) max_d = std::max(max_d, std::abs(rr[i] - rr[i - 1]));
        EXPECT_GE(r->rmssd_ms, 0.0);
        EXPECT_LE(r->rmssd_ms, max_d + 1e-9);
        EXPECT_LE(r->n_diffs, r->n_beats - 1);
    }
}

TEST(Calibrate, ThreeReadings) {
    std::vector<HrvReading> v = {reading_of(30), reading_of(40), reading_of(50)};
    auto b = calibrate(v, 3);
    EXPECT_DOUBLE_EQ(b.mean, 40.0);
    EXPECT_DOUBLE_EQ(b.sd, 10.0);
    EXPECT_DOUBLE_EQ(b.threshold(), 25.0);
    EXPECT_EQ(b.n_samples, 3u);
}

TEST(Calibrate, ZeroVariance) {
    std::vector<HrvReading> v = {reading_of(42), reading_of(42), reading_of(42)};
    auto b = calibrate(v, 3);
    EXPECT_EQ(b.mean, 42.0);
    EXPECT_EQ(b.sd, 0.0);
    EXPECT_EQ(b.threshold(), 42.0);
}

TEST(Calibrate, NotEnoughData) {
    std::vector<HrvReading> v = {reading_of(42), reading_of(43)};
    try {
        calibrate(v, 100);
        FAIL();
    } catch (const NotEnoughData& e) {
        EXPECT_EQ(e.count(), 2u);
        EXPECT_EQ(e.min_samples(), 100u);
    }
}

TEST(Calibrate, MatchesOracleAndAccumulator) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(5, 120);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<HrvReading> v;
        std::vector<double> xs;
        BaselineAccumulator acc;
        for (int i = 0; i < 150; ++i) {
            auto r = reading_of(u(rng));
            r.window_end_ms = i * 1000;
            v.push_back(r);
            xs.push_back(r.rmssd_ms);
            acc.add(r);
        }
        auto b = calibrate(v);
        auto w = acc.finish();
        EXPECT_NEAR(b.mean, oracle::mean(xs), 1e-9);
        EXPECT_NEAR(b.sd, oracle::sample_sd(xs), 1e-9);
        EXPECT_NEAR(w.mean, b.mean, 1e-9);
        EXPECT_NEAR(w.sd, b.sd, 1e-9);
        EXPECT_EQ(w.period_start, 0);
        EXPECT_EQ(w.period_end, 149000);
    }
}

TEST(Classify, Examples) {
    Baseline b;
    b.mean = 40;
    b.sd = 10;
    EXPECT_EQ(classify(reading_of(24.9), b), StressState::stressed);
    EXPECT_EQ(classify(reading_of(25.0), b), StressState::calm);
    EXPECT_EQ(classify(reading_of(60), b), StressState::calm);
    EXPECT_EQ(classify(std::optional<HrvReading>{}, b), StressState::insufficient_data);
}

TEST(Classify, ScaleInvariant) {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(0, 100);
    for (int i = 0; i < 1000; ++i) {
        Baseline b;
        b.mean = u(rng);
        b.sd = u(rng) / 4;
        const double x = u(rng);
        const double a = 4.0;  // power of two keeps the products exact
        Baseline bs = b;
        bs.mean *= a;
        bs.sd *= a;
        EXPECT_EQ(classify(reading_of(x), b), classify(reading_of(a * x), bs));
    }
}
