#include <gtest/gtest.h>

#include <random>

#include "heartbeatcam/rng.hpp"
#include "heartbeatcam/scheduler.hpp"

using namespace heartbeatcam;

TEST(Scheduler, FiresInTimeOrder) {
    Scheduler s;
    std::string order;
    s.schedule_at(10, [&] { order += "A"; });
    s.schedule_at(5, [&] { order += "B"; });
    EXPECT_EQ(s.advance(20), 2u);
    EXPECT_EQ(order, "BA");
    EXPECT_EQ(s.now(), 20);
}

TEST(Scheduler, TiesFireInInsertionOrder) {
    Scheduler s;
    std::string order;
    s.schedule_at(5, [&] { order += "1"; });
    s.schedule_at(5, [&] { order += "2"; });
    s.schedule_at(5, [&] { order += "3"; });
    s.advance(5);
    EXPECT_EQ(order, "123");
}

TEST(Scheduler, AdvanceBackwardThrows) {
    Scheduler s;
    s.advance(5);
    EXPECT_THROW(s.advance(3), StateError);
}

TEST(Scheduler, SchedulingInThePastThrows) {
    Scheduler s;
    s.advance(100);
    EXPECT_THROW(s.schedule_at(99, [] {}), StateError);
    EXPECT_NO_THROW(s.schedule_at(100, [] {}));
}

TEST(Scheduler, CallbacksSeeEventTimeAndMayScheduleNow) {
    Scheduler s;
    std::vector<TimeMs> seen;
    s.schedule_at(7, [&] {
        seen.push_back(s.now());
        s.schedule_in(0, [&] { seen.push_back(s.now()); });
        s.schedule_in(3, [&] { seen.push_back(s.now()); });
    });
    s.advance(8);
    EXPECT_EQ(seen, (std::vector<TimeMs>{7, 7}));
    s.advance(10);
    EXPECT_EQ(seen, (std::vector<TimeMs>{7, 7, 10}));
}

TEST(Scheduler, CancelledEventsDoNotFire) {
    Scheduler s;
    int fired = 0;
    auto id = s.schedule_at(5, [&] { ++fired; });
    s.schedule_at(6, [&] { ++fired; });
    s.cancel(id);
    EXPECT_EQ(s.advance(10), 1u);
    EXPECT_EQ(fired, 1);
}

TEST(Scheduler, RandomisedScheduleNeverGoesBackward) {
    std::mt19937_64 rng(3);
    Scheduler s;
    TimeMs last = 0;
    std::vector<std::pair<TimeMs, std::uint64_t>> fired;
    for (int i = 0; i < 2000; ++i) {
        const TimeMs at = static_cast<TimeMs>(rng() % 500);
        s.schedule_at(at, [&, at] {
            EXPECT_GE(s.now(), last);
            EXPECT_EQ(s.now(), at);
            last = s.now();
            if (rng() % 4 == 0) s.schedule_in(static_cast<TimeMs>(rng() % 50), [&] {
                    EXPECT_GE(s.now(), last);
                    last = s.now();
                });
        });
    }
    s.advance(10'000);
    EXPECT_TRUE(s.idle());
}

TEST(Scheduler, ObserverSeesLabels) {
    Scheduler s;
    std::vector<std::string> labels;
    s.schedule_at(1, [] {}, "first");
    s.schedule_at(2, [] {}, "second");
    s.advance(5, [&](const Scheduler::Fired& f) { labels.push_back(f.label); });
    EXPECT_EQ(labels, (std::vector<std::string>{"first", "second"}));
}

TEST(Rng, SeedAndStreamDetermineSequence) {
    Rng a(42, 1), b(42, 1), c(42, 2), d(43, 1);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs_c |= x != c.next_u64();
        differs_d |= x != d.next_u64();
    }
    EXPECT_TRUE(differs_c);
    EXPECT_TRUE(differs_d);
}

TEST(Rng, UniformStaysInRange) {
    Rng r(1, 1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const auto k = r.uniform_int(12, 25);
        ASSERT_GE(k, 12);
        ASSERT_LE(k, 25);
    }
}
