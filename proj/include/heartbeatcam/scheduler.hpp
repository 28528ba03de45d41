#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hrv.hpp"

namespace heartbeatcam {

class Clock {
public:
    virtual ~Clock() = default;
    virtual TimeMs now() const = 0;
};

/// Discrete-event scheduler over a virtual millisecond clock.
///
/// Events fire in (time, insertion order). The clock never moves backward:
/// advancing to an earlier time or scheduling before now() throws StateError.
/// Callbacks may schedule further events, including at the current time.
class Scheduler final : public Clock {
public:
    using EventId = std::uint64_t;
    using Callback = std::function<void()>;

    struct Fired {
        EventId id;
        TimeMs at;
        std::string label;
    };

    explicit Scheduler(TimeMs start = 0) : now_(start) {}

    TimeMs now() const override { return now_; }

    EventId schedule_at(TimeMs at, Callback fn, std::string label = {}) {
        if (at < now_)
            throw StateError("cannot schedule at " + std::to_string(at) + " before now " +
                             std::to_string(now_));
        const EventId id = next_id_++;
        queue_.push(Entry{at, id, std::move(label), std::move(fn)});
        return id;
    }

    EventId schedule_in(TimeMs delay, Callback fn, std::string label = {}) {
        return schedule_at(now_ + delay, std::move(fn), std::move(label));
    }

    void cancel(EventId id) { cancelled_.insert(id); }

    /// Fires every pending event with time <= `to`, then sets now() to `to`.
    /// Returns the number of events fired.
    std::size_t advance(TimeMs to, const std::function<void(const Fired&)>& on_fire = {}) {
        if (to < now_)
            throw StateError("cannot advance to " + std::to_string(to) + " from " +
                             std::to_string(now_));
        std::size_t fired = 0;
        while (!queue_.empty() && queue_.top().at <= to) {
            Entry e = queue_.top();
            queue_.pop();
            if (auto it = cancelled_.find(e.id); it != cancelled_.end()) {
                cancelled_.erase(it);
                continue;
            }
            now_ = e.at;
            if (on_fire) on_fire(Fired{e.id, e.at, e.label});
            if (e.fn) e.fn();
            ++fired;
        }
        now_ = to;
        return fired;
    }

    /// Runs until the queue is empty or the next event lies beyond `limit`.
    std::size_t run_until_idle(TimeMs limit) {
        std::size_t fired = 0;
        while (!queue_.empty() && queue_.top().at <= limit) fired += advance(queue_.top().at);
        return fired;
    }

    std::optional<TimeMs> next_time() const {
        if (queue_.empty()) return std::nullopt;
        return queue_.top().at;
    }

    bool idle() const noexcept { return queue_.empty(); }
    std::size_t pending() const noexcept { return queue_.size(); }

private:
    struct Entry {
        TimeMs at;
        EventId id;
        std::string label;
        Callback fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const noexcept {
            return a.at != b.at ? a.at > b.at : a.id > b.id;
        }
    };

    TimeMs now_;
    EventId next_id_ = 1;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    std::unordered_set<EventId> cancelled_;
};

}  // namespace heartbeatcam
