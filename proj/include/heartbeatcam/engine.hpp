#pragma once

// Phone-side engine: consumes RR samples and glasses frames, runs the
// trigger state machine, services one capture transfer at a time and writes
// the outcome to the store. Everything runs on the scheduler's event loop.

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "heartbeatcam/event.hpp"
#include "heartbeatcam/frame.hpp"
#include "heartbeatcam/hrv.hpp"
#include "heartbeatcam/link.hpp"
#include "heartbeatcam/scheduler.hpp"
#include "heartbeatcam/store.hpp"
#include "heartbeatcam/trigger.hpp"

namespace heartbeatcam {

// ---------------------------------------------------------------------------
// Transition log

struct LogEntry {
    std::uint64_t seq = 0;
    TimeMs t = 0;
    std::string kind;
    nlohmann::ordered_json details = nlohmann::ordered_json::object();

    /// `<t_ms> <event_kind> <key=value ...>`
    std::string line() const {
        std::string out = std::to_string(t) + " " + kind;
        for (const auto& [k, v] : details.items()) {
            out += " " + k + "=";
            out += v.is_string() ? v.get<std::string>() : v.dump();
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["seq"] = seq;
        j["t"] = t;
        j["kind"] = kind;
        j["details"] = details;
        return j;
    }
};

/// Transitions are recorded and published; readings are published only, so
/// week-long runs do not keep one line per heartbeat.
class EventLog {
public:
    using Listener = std::function<void(const LogEntry&)>;

    void record(TimeMs t, std::string kind, nlohmann::ordered_json details = nlohmann::ordered_json::object()) {
        LogEntry e{++seq_, t, std::move(kind), std::move(details)};
        entries_.push_back(e);
        notify(e);
    }

    void publish(TimeMs t, std::string kind, nlohmann::ordered_json details = nlohmann::ordered_json::object()) {
        notify(LogEntry{++seq_, t, std::move(kind), std::move(details)});
    }

    std::size_t subscribe(Listener l) {
        listeners_.push_back(std::move(l));
        return listeners_.size() - 1;
    }

    void unsubscribe(std::size_t token) {
        if (token < listeners_.size()) listeners_[token] = nullptr;
    }

    const std::vector<LogEntry>& entries() const noexcept { return entries_; }

    std::string text() const {
        std::string out;
        for (const auto& e : entries_) out += e.line() + "\n";
        return out;
    }

    std::size_t count(std::string_view kind) const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.kind == kind;
        return n;
    }

private:
    void notify(const LogEntry& e) {
        for (const auto& l : listeners_)
            if (l) l(e);
    }

    std::uint64_t seq_ = 0;
    std::vector<LogEntry> entries_;
    std::vector<Listener> listeners_;
};

// ---------------------------------------------------------------------------
// Trigger sources

/// One stress judgement handed to the engine. While `calibrating` is set the
/// source has no baseline yet and `state` carries no meaning.
struct StressEvent {
    TimeMs at = 0;
    std::optional<HrvReading> reading;
    StressState state = StressState::insufficient_data;
    bool calibrating = false;
    std::optional<Baseline> baseline;
};

/// Provider of timestamp-ordered stress judgements. The built-in source
/// derives them from RR intervals; other providers (a vendor stress score,
/// for instance) plug in by emitting StressEvents themselves.
class TriggerSource {
public:
    using Sink = std::function<void(const StressEvent&)>;

    virtual ~TriggerSource() = default;
    void set_sink(Sink sink) { sink_ = std::move(sink); }

protected:
    void emit(const StressEvent& e) {
        if (sink_) sink_(e);
    }

private:
    Sink sink_;
};

struct HrvConfig {
    WindowConfig window;
    ValidationRange range;
    TimeMs calibration_ms = 7LL * 24 * 3600 * 1000;
    std::size_t min_calibration_samples = default_min_calibration_samples;
    double k = default_threshold_k;
};

/// RR samples -> windowed RMSSD -> calibrate for `calibration_ms` of stream
/// time (and at least min_calibration_samples readings) -> classify.
class HrvStressSource final : public TriggerSource {
public:
    explicit HrvStressSource(HrvConfig config = {}) : config_(config), stream_(config.window, config.range) {}

    void push(const RrSample& sample) {
        auto result = stream_.push(sample);
        if (!result.accepted) return;
        if (!calibration_start_) calibration_start_ = sample.t_ms;

        StressEvent ev;
        ev.at = sample.t_ms;
        ev.reading = result.reading;
        if (!baseline_ && result.reading) {
            if (result.reading->window_end_ms - *calibration_start_ >= config_.calibration_ms &&
                accumulator_.count() >= config_.min_calibration_samples) {
                baseline_ = accumulator_.finish(config_.min_calibration_samples, config_.k);
            } else {
                accumulator_.add(*result.reading);
            }
        }
        ev.calibrating = !baseline_.has_value();
        ev.baseline = baseline_;
        ev.state = baseline_ ? classify(result.reading, *baseline_) : StressState::insufficient_data;
        emit(ev);
    }

    /// Skips calibration with a known baseline.
    void set_baseline(const Baseline& b) { baseline_ = b; }

    const std::optional<Baseline>& baseline() const noexcept { return baseline_; }
    const RmssdStream& stream() const noexcept { return stream_; }
    std::size_t calibration_readings() const noexcept { return accumulator_.count(); }

private:
    HrvConfig config_;
    RmssdStream stream_;
    BaselineAccumulator accumulator_;
    std::optional<TimeMs> calibration_start_;
    std::optional<Baseline> baseline_;
};

// ---------------------------------------------------------------------------
// Engine

struct EngineConfig {
    HrvConfig hrv;
    TriggerConfig trigger;
    TimeMs reading_publish_interval_ms = 1000;
};

struct EngineCounters {
    std::size_t readings = 0;
    std::size_t captures_total = 0;
    std::size_t completes_total = 0;
    std::size_t failures_total = 0;
};

class Engine {
public:
    Engine(Scheduler& scheduler, Store& store, EventLog& log, EngineConfig config = {})
        : scheduler_(scheduler), store_(store), log_(log), config_(config), source_(config.hrv) {
        config_.trigger.validate();
        source_.set_sink([this](const StressEvent& e) { on_stress(e); });
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Phone -> glasses direction used for capture commands and NACKs.
    void attach_glasses(SimLink& downlink) { downlink_ = &downlink; }

    void start() {
        if (state_.mode != Mode::idle) return;
        set_mode(source_.baseline() ? Mode::monitoring : Mode::calibrating, "start");
        if (source_.baseline()) log_calibrated(*source_.baseline());
    }

    void set_baseline(const Baseline& b) { source_.set_baseline(b); }

    /// Frames from the watch link.
    void on_watch_frame(const Frame& f) {
        if (!f.crc_ok()) {
            log_.record(scheduler_.now(), "frame_rejected",
                        {{"kind", to_string(f.kind)}, {"reason", "checksum_mismatch"}});
            return;
        }
        if (f.kind == FrameKind::rr_sample) on_rr(RrSampleMsg::decode(f.payload).sample);
    }

    void on_rr(const RrSample& sample) { source_.push(sample); }

    /// Entry point for any trigger source, built-in or external.
    void on_stress(const StressEvent& e) {
        const TimeMs now = scheduler_.now();
        if (state_.mode == Mode::idle) return;
        if (e.reading) {
            ++counters_.readings;
            last_reading_ = e.reading;
            publish_reading(now, *e.reading, e);
        }
        if (e.calibrating) return;
        if (state_.mode == Mode::calibrating) {
            set_mode(Mode::monitoring, "calibrated");
            if (e.baseline) log_calibrated(*e.baseline);
        }
        if (e.baseline) baseline_ = e.baseline;
        if (!e.reading || e.state == StressState::insufficient_data) {
            state_ = on_insufficient(state_);
            return;
        }
        auto decision = on_reading(state_, *e.reading, e.state, now, config_.trigger);
        state_ = decision.state;
        if (decision.skipped == SkipReason::in_flight)
            log_.record(now, "capture_skipped", {{"reason", "in_flight"}, {"in_flight", *state_.in_flight}});
        if (decision.request) begin_capture(*decision.request);
    }

    /// Frames from the glasses link.
    void on_glasses_frame(const Frame& f) {
        const TimeMs now = scheduler_.now();
        if (!f.crc_ok()) {
            log_.record(now, "frame_rejected", {{"kind", to_string(f.kind)}, {"reason", "checksum_mismatch"}});
            if (transfer_ && f.capture_id == transfer_->request.capture_id && transfer_->receiving)
                fail_attempt(FailureReason::checksum_mismatch);
            return;
        }
        switch (f.kind) {
            case FrameKind::tap: on_tap_event(TapMsg::decode(f.payload).kind); break;
            case FrameKind::capture_meta: on_meta(f); break;
            case FrameKind::chunk: on_chunk(f); break;
            case FrameKind::capture_end: on_end(f); break;
            default: break;
        }
    }

    void on_tap_event(TapKind kind) {
        const TimeMs now = scheduler_.now();
        auto d = on_tap(state_, kind);
        if (d.effect == TapEffect::ignored) {
            log_.record(now, "tap_ignored", {{"mode", to_string(state_.mode)}});
            return;
        }
        const Mode from = state_.mode;
        state_ = d.state;
        log_.record(now, "state_change",
                    {{"from", to_string(from)}, {"to", to_string(state_.mode)}, {"cause", "double_tap"}});
        store_.record_pause(now, state_.mode == Mode::paused);
    }

    const EngineState& state() const noexcept { return state_; }
    const std::optional<Baseline>& baseline() const noexcept { return source_.baseline(); }
    const std::optional<HrvReading>& last_reading() const noexcept { return last_reading_; }
    const EngineCounters& counters() const noexcept { return counters_; }
    bool capture_in_flight() const noexcept { return transfer_ != nullptr; }
    const HrvStressSource& hrv() const noexcept { return source_; }
    const EngineConfig& config() const noexcept { return config_; }

private:
    struct Transfer {
        CaptureRequest request;
        BaselineSnapshot baseline;
        std::uint8_t attempt = 0;
        std::optional<Scheduler::EventId> deadline;
        bool receiving = false;
        bool broken = false;
        CaptureMetaMsg meta;
        std::uint32_t next_index = 0;
        Bytes image;
        Bytes audio;
    };

    void set_mode(Mode to, const char* cause) {
        const Mode from = state_.mode;
        state_.mode = to;
        log_.record(scheduler_.now(), "state_change",
                    {{"from", to_string(from)}, {"to", to_string(to)}, {"cause", cause}});
    }

    void log_calibrated(const Baseline& b) {
        log_.record(scheduler_.now(), "calibrated",
                    {{"mean", b.mean}, {"sd", b.sd}, {"k", b.k}, {"threshold", b.threshold()}, {"n_samples", b.n_samples}});
    }

    void publish_reading(TimeMs now, const HrvReading& r, const StressEvent& e) {
        if (last_publish_ && now - *last_publish_ < config_.reading_publish_interval_ms) return;
        last_publish_ = now;
        log_.publish(now, "reading",
                     {{"rmssd_ms", r.rmssd_ms},
                      {"hr_bpm", r.mean_hr_bpm},
                      {"n_beats", r.n_beats},
                      {"state", e.calibrating ? std::string("calibrating") : std::string(to_string(e.state))},
                      {"threshold", e.baseline ? nlohmann::ordered_json(e.baseline->threshold()) : nlohmann::ordered_json()}});
    }

    void begin_capture(const CaptureRequest& req) {
        ++counters_.captures_total;
        transfer_ = std::make_unique<Transfer>();
        transfer_->request = req;
        if (baseline_) transfer_->baseline = {baseline_->mean, baseline_->sd, baseline_->k};
        log_.record(scheduler_.now(), "capture_started",
                    {{"id", req.capture_id},
                     {"rmssd_ms", req.reading.rmssd_ms},
                     {"hr_bpm", req.reading.mean_hr_bpm},
                     {"threshold", baseline_ ? nlohmann::ordered_json(baseline_->threshold()) : nlohmann::ordered_json()}});
        start_attempt();
    }

    void start_attempt() {
        auto& tr = *transfer_;
        ++tr.attempt;
        tr.receiving = false;
        tr.broken = false;
        tr.image.clear();
        tr.audio.clear();
        tr.next_index = 0;
        const TimeMs now = scheduler_.now();
        log_.record(now, "capture_attempt", {{"id", tr.request.capture_id}, {"attempt", tr.attempt}});
        if (!downlink_ || !downlink_->connected()) {
            fail_attempt(FailureReason::disconnected);
            return;
        }
        CaptureCmdMsg cmd{tr.attempt, tr.request.at};
        downlink_->send(make_frame(FrameKind::capture_cmd, tr.request.capture_id, cmd.encode()));
        const auto attempt = tr.attempt;
        tr.deadline = scheduler_.schedule_in(
            config_.trigger.transfer_timeout_ms,
            [this, attempt] {
                if (transfer_ && transfer_->attempt == attempt) {
                    transfer_->deadline.reset();
                    fail_attempt(FailureReason::timeout);
                }
            },
            "transfer_timeout");
    }

    void fail_attempt(FailureReason reason) {
        auto& tr = *transfer_;
        if (tr.deadline) {
            scheduler_.cancel(*tr.deadline);
            tr.deadline.reset();
        }
        if (tr.receiving && downlink_) {
            NackMsg nack{tr.attempt, reason == FailureReason::checksum_mismatch ? NackReason::checksum_mismatch
                                                                                  : NackReason::abort};
            downlink_->send(make_frame(FrameKind::nack, tr.request.capture_id, nack.encode()));
        }
        tr.receiving = false;
        log_.record(scheduler_.now(), "capture_attempt_failed",
                    {{"id", tr.request.capture_id}, {"attempt", tr.attempt}, {"reason", to_string(reason)}});
        if (tr.attempt < 1 + config_.trigger.command_retries) {
            const auto attempt = tr.attempt;
            scheduler_.schedule_in(
                config_.trigger.retry_delay_ms,
                [this, attempt] {
                    if (transfer_ && transfer_->attempt == attempt) start_attempt();
                },
                "capture_retry");
            return;
        }
        finish_failed(reason);
    }

    bool current(const Frame& f) const {
        return transfer_ && f.capture_id && *f.capture_id == transfer_->request.capture_id;
    }

    void on_meta(const Frame& f) {
        if (!current(f)) return;
        auto& tr = *transfer_;
        const auto meta = CaptureMetaMsg::decode(f.payload);
        if (meta.attempt != tr.attempt) return;
        tr.meta = meta;
        tr.receiving = true;
        tr.image.reserve(meta.image_size);
        tr.audio.reserve(meta.audio_size);
    }

    void on_chunk(const Frame& f) {
        if (!current(f) || !transfer_->receiving) return;
        auto& tr = *transfer_;
        if (tr.broken) return;
        // Lost or reordered chunks cannot be recovered; the attempt runs into its deadline.
        if (f.index != tr.next_index) {
            tr.broken = true;
            return;
        }
        ++tr.next_index;
        Bytes& dst = f.index < tr.meta.image_chunks ? tr.image : tr.audio;
        dst.insert(dst.end(), f.payload.begin(), f.payload.end());
        if (tr.image.size() > tr.meta.image_size || tr.audio.size() > tr.meta.audio_size) tr.broken = true;
    }

    void on_end(const Frame& f) {
        if (!current(f) || !transfer_->receiving) return;
        auto& tr = *transfer_;
        const auto end = CaptureEndMsg::decode(f.payload);
        if (end.attempt != tr.attempt || tr.broken) return;
        if (tr.next_index != end.total_chunks || tr.image.size() != tr.meta.image_size ||
            tr.audio.size() != tr.meta.audio_size)
            return;
        if (crc32(tr.image) != end.image_crc || crc32(tr.audio) != end.audio_crc) {
            fail_attempt(FailureReason::checksum_mismatch);
            return;
        }
        if (tr.deadline) scheduler_.cancel(*tr.deadline);
        finish_complete();
    }

    CaptureEvent base_event() const {
        const auto& tr = *transfer_;
        CaptureEvent ev;
        ev.id = tr.request.capture_id;
        ev.captured_at = tr.request.at;
        ev.hr_bpm = tr.request.reading.mean_hr_bpm;
        ev.rmssd_ms = tr.request.reading.rmssd_ms;
        ev.baseline = tr.baseline;
        ev.attempts = tr.attempt;
        return ev;
    }

    void finish_complete() {
        CaptureEvent ev = base_event();
        ev.status = CaptureStatus::complete;
        SyntheticPayload payload{std::move(transfer_->image), std::move(transfer_->audio)};
        const auto image_bytes = payload.image.size();
        const auto audio_bytes = payload.audio.size();
        store_.append_event(ev, &payload);
        ++counters_.completes_total;
        log_.record(scheduler_.now(), "capture_complete",
                    {{"id", ev.id}, {"attempts", ev.attempts}, {"image_bytes", image_bytes}, {"audio_bytes", audio_bytes}});
        finish(ev.id, ev.captured_at);
    }

    void finish_failed(FailureReason reason) {
        CaptureEvent ev = base_event();
        ev.status = CaptureStatus::failed;
        ev.failure_reason = reason;
        store_.append_event(ev);
        ++counters_.failures_total;
        log_.record(scheduler_.now(), "capture_failed",
                    {{"id", ev.id}, {"reason", to_string(reason)}, {"attempts", ev.attempts}});
        finish(ev.id, ev.captured_at);
    }

    void finish(CaptureId id, TimeMs captured_at) {
        transfer_.reset();
        state_ = on_capture_done(state_, id);
        const TimeMs reveal_at = captured_at + store_.reveal_delay();
        scheduler_.schedule_at(
            std::max(reveal_at, scheduler_.now()),
            [this, id] { log_.record(scheduler_.now(), "reveal", {{"id", id}}); }, "reveal");
    }

    Scheduler& scheduler_;
    Store& store_;
    EventLog& log_;
    EngineConfig config_;
    HrvStressSource source_;
    SimLink* downlink_ = nullptr;
    EngineState state_;
    std::optional<Baseline> baseline_;
    std::optional<HrvReading> last_reading_;
    std::optional<TimeMs> last_publish_;
    std::unique_ptr<Transfer> transfer_;
    EngineCounters counters_;
};

}  // namespace heartbeatcam
