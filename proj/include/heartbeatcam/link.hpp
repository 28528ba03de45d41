#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "heartbeatcam/frame.hpp"
#include "heartbeatcam/rng.hpp"
#include "heartbeatcam/scenario.hpp"
#include "heartbeatcam/scheduler.hpp"

namespace heartbeatcam {

/// The set of scripted faults, queried by time.
class FaultSchedule {
public:
    FaultSchedule() = default;
    explicit FaultSchedule(std::vector<Fault> faults) : faults_(std::move(faults)) {}

    bool disconnected(TimeMs t) const noexcept {
        return std::any_of(faults_.begin(), faults_.end(),
                           [&](const Fault& f) { return f.kind == FaultKind::disconnect && f.active_at(t); });
    }

    /// Combined probability that an active set of same-kind faults hits a frame.
    double probability(FaultKind kind, TimeMs t) const noexcept {
        double pass = 1.0;
        for (const auto& f : faults_)
            if (f.kind == kind && f.active_at(t)) pass *= 1.0 - f.pct / 100.0;
        return 1.0 - pass;
    }

    double max_latency(TimeMs t) const noexcept {
        double m = 0.0;
        for (const auto& f : faults_)
            if (f.kind == FaultKind::latency && f.active_at(t)) m = std::max(m, f.latency_ms);
        return m;
    }

    const std::vector<Fault>& faults() const noexcept { return faults_; }

private:
    std::vector<Fault> faults_;
};

enum class LinkOutcome { delivered, dropped_disconnect, dropped_loss };

struct LinkStats {
    std::size_t sent = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    std::size_t corrupted = 0;
};

/// One direction of a simulated radio link.
///
/// Faults are evaluated at send time. Disconnects drop everything, drop_pct
/// drops each frame independently, corrupt_pct flips one payload bit, and
/// latency adds a seeded delay in [0, latency_ms]. Delivery stays FIFO: a
/// frame is never delivered before one sent earlier on the same link.
class SimLink {
public:
    using Receiver = std::function<void(const Frame&)>;

    SimLink(Scheduler& scheduler, const FaultSchedule& faults, std::uint64_t seed,
            std::uint64_t stream, TimeMs base_latency_ms = 0)
        : scheduler_(scheduler), faults_(faults), rng_(seed, stream), base_latency_(base_latency_ms) {}

    void set_receiver(Receiver r) { receiver_ = std::move(r); }

    bool connected() const noexcept { return !faults_.disconnected(scheduler_.now()); }

    LinkOutcome send(Frame frame) {
        const TimeMs now = scheduler_.now();
        frame.seq = next_seq_++;
        ++stats_.sent;
        if (faults_.disconnected(now)) {
            ++stats_.dropped;
            return LinkOutcome::dropped_disconnect;
        }
        // Draw order is fixed so that one fault's presence does not reshuffle
        // the random stream seen by another.
        const double u_drop = rng_.uniform();
        const double u_corrupt = rng_.uniform();
        const double u_latency = rng_.uniform();
        const std::uint64_t bit_draw = rng_.next_u64();

        if (u_drop < faults_.probability(FaultKind::drop_pct, now)) {
            ++stats_.dropped;
            return LinkOutcome::dropped_loss;
        }
        if (!frame.payload.empty() && u_corrupt < faults_.probability(FaultKind::corrupt_pct, now)) {
            const std::size_t bit = bit_draw % (frame.payload.size() * 8);
            frame.payload[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            ++stats_.corrupted;
        }
        const auto extra = static_cast<TimeMs>(std::llround(u_latency * faults_.max_latency(now)));
        const TimeMs at = std::max(now + base_latency_ + extra, last_delivery_);
        last_delivery_ = at;
        ++stats_.delivered;
        scheduler_.schedule_at(at, [this, f = std::move(frame)] {
            if (receiver_) receiver_(f);
        });
        return LinkOutcome::delivered;
    }

    const LinkStats& stats() const noexcept { return stats_; }

private:
    Scheduler& scheduler_;
    const FaultSchedule& faults_;
    Rng rng_;
    TimeMs base_latency_;
    TimeMs last_delivery_ = 0;
    std::uint32_t next_seq_ = 0;
    LinkStats stats_;
    Receiver receiver_;
};

}  // namespace heartbeatcam
