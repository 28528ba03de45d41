#pragma once

// Capture trigger state machine: stress classifications in, rate-limited
// capture requests out. Pure functions over EngineState; the orchestration
// that services a request lives in engine.hpp.

#include <cstdint>
#include <optional>
#include <string_view>

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hrv.hpp"

namespace heartbeatcam {

struct TriggerConfig {
    TimeMs min_capture_interval_ms = 60'000;
    unsigned debounce_count = 1;
    TimeMs transfer_timeout_ms = 10'000;
    bool retrigger_while_stressed = true;
    unsigned command_retries = 1;
    TimeMs retry_delay_ms = 1'000;

    void validate() const {
        if (min_capture_interval_ms <= 0)
            throw ValidationError("min_capture_interval", "min_capture_interval must be positive");
        if (debounce_count < 1) throw ValidationError("debounce_count", "debounce_count must be at least 1");
        if (transfer_timeout_ms <= 0)
            throw ValidationError("transfer_timeout", "transfer_timeout must be positive");
        if (retry_delay_ms < 0) throw ValidationError("retry_delay", "retry_delay must be non-negative");
    }
};

enum class Mode { idle, calibrating, monitoring, paused };

constexpr std::string_view to_string(Mode m) noexcept {
    switch (m) {
        case Mode::idle: return "idle";
        case Mode::calibrating: return "calibrating";
        case Mode::monitoring: return "monitoring";
        case Mode::paused: return "paused";
    }
    return "unknown";
}

using CaptureId = std::uint32_t;

struct EngineState {
    Mode mode = Mode::idle;
    std::optional<TimeMs> last_capture_at;
    unsigned consecutive_stressed = 0;
    std::optional<CaptureId> in_flight;
    bool fired_this_run = false;  // edge-trigger bookkeeping
    CaptureId next_capture_id = 1;

    friend bool operator==(const EngineState&, const EngineState&) = default;
};

struct CaptureRequest {
    CaptureId capture_id = 0;
    TimeMs at = 0;
    HrvReading reading;
};

enum class SkipReason { paused, rate_limited, in_flight, edge_hold };

constexpr std::string_view to_string(SkipReason r) noexcept {
    switch (r) {
        case SkipReason::paused: return "paused";
        case SkipReason::rate_limited: return "rate_limited";
        case SkipReason::in_flight: return "in_flight";
        case SkipReason::edge_hold: return "edge_hold";
    }
    return "unknown";
}

struct TriggerDecision {
    EngineState state;
    std::optional<CaptureRequest> request;
    /// Set when the reading completed a debounced stressed run but was not
    /// allowed to fire.
    std::optional<SkipReason> skipped;
};

/// Advances the trigger for one classified reading.
///
/// Fires iff monitoring, the stressed run has reached debounce_count, no
/// capture is in flight, and at least min_capture_interval has elapsed since
/// the previous capture. Without retrigger_while_stressed a run fires at most
/// once and a non-stressed reading must intervene before the next.
inline TriggerDecision on_reading(EngineState state, const HrvReading& reading,
                                  StressState classification, TimeMs now, const TriggerConfig& config) {
    TriggerDecision out;
    if (state.mode != Mode::monitoring && state.mode != Mode::paused) {
        out.state = state;
        return out;
    }
    if (classification != StressState::stressed) {
        state.consecutive_stressed = 0;
        state.fired_this_run = false;
        out.state = state;
        return out;
    }
    ++state.consecutive_stressed;
    if (state.consecutive_stressed >= config.debounce_count) {
        if (state.mode == Mode::paused) {
            out.skipped = SkipReason::paused;
        } else if (!config.retrigger_while_stressed && state.fired_this_run) {
            out.skipped = SkipReason::edge_hold;
        } else if (state.last_capture_at && now - *state.last_capture_at < config.min_capture_interval_ms) {
            out.skipped = SkipReason::rate_limited;
        } else if (state.in_flight) {
            out.skipped = SkipReason::in_flight;
        } else {
            CaptureRequest req;
            req.capture_id = state.next_capture_id++;
            req.at = now;
            req.reading = reading;
            state.last_capture_at = now;
            state.in_flight = req.capture_id;
            state.fired_this_run = true;
            out.request = req;
        }
    }
    out.state = state;
    return out;
}

/// A window without enough beats ends any stressed run.
inline EngineState on_insufficient(EngineState state) {
    state.consecutive_stressed = 0;
    state.fired_this_run = false;
    return state;
}

enum class TapKind : std::uint8_t { double_tap = 1 };

enum class TapEffect { paused, resumed, ignored };

struct TapDecision {
    EngineState state;
    TapEffect effect = TapEffect::ignored;
};

/// A double tap toggles monitoring and paused; anything else is ignored.
/// In-flight captures are left alone either way.
inline TapDecision on_tap(EngineState state, TapKind kind = TapKind::double_tap) {
    TapDecision out;
    if (kind != TapKind::double_tap) {
        out.state = state;
        return out;
    }
    if (state.mode == Mode::monitoring) {
        state.mode = Mode::paused;
        out.effect = TapEffect::paused;
    } else if (state.mode == Mode::paused) {
        state.mode = Mode::monitoring;
        out.effect = TapEffect::resumed;
    }
    out.state = state;
    return out;
}

/// Marks the in-flight capture finished (complete or failed).
inline EngineState on_capture_done(EngineState state, CaptureId id) {
    if (state.in_flight == id) state.in_flight.reset();
    return state;
}

}  // namespace heartbeatcam
