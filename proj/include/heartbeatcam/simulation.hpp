#pragma once

// Whole-system harness: watch, glasses, links and engine on one scheduler,
// driven by a scenario. Single-threaded; callers advance virtual time.

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "heartbeatcam/engine.hpp"
#include "heartbeatcam/glasses.hpp"
#include "heartbeatcam/link.hpp"
#include "heartbeatcam/rr_generator.hpp"
#include "heartbeatcam/scenario.hpp"
#include "heartbeatcam/scheduler.hpp"
#include "heartbeatcam/store.hpp"

namespace heartbeatcam {

struct SimulationOptions {
    EngineConfig engine;
    StoreOptions store;
    GlassesTiming glasses;
    RrModel rr_model;
    std::optional<Baseline> baseline;  // skip calibration
    TimeMs link_latency_ms = 5;
};

struct SimulationSummary {
    std::size_t captures = 0;
    std::size_t complete = 0;
    std::size_t failures = 0;
    TimeMs ended_at = 0;
};

inline constexpr const char* trigger_log_name = "trigger.log";

class Simulation {
public:
    Simulation(Scenario scenario, const std::filesystem::path& store_dir, SimulationOptions options = {})
        : scenario_(std::move(scenario)),
          options_(options),
          faults_(scenario_.faults),
          store_dir_(store_dir),
          store_(store_dir, options.store),
          watch_link_(scheduler_, no_faults_, scenario_.seed, 0x5741, options.link_latency_ms),
          glasses_up_(scheduler_, faults_, scenario_.seed, 0x5550, options.link_latency_ms),
          glasses_down_(scheduler_, faults_, scenario_.seed, 0x444E, options.link_latency_ms),
          generator_(scenario_, options.rr_model),
          glasses_(scheduler_, glasses_up_, options.glasses),
          engine_(scheduler_, store_, log_, options.engine) {
        if (store_.event_count() != 0 || store_.last_clock())
            throw StateError("simulation needs an empty store: " + store_dir.string());
        if (options_.baseline) engine_.set_baseline(*options_.baseline);
        engine_.attach_glasses(glasses_down_);
        watch_link_.set_receiver([this](const Frame& f) { engine_.on_watch_frame(f); });
        glasses_up_.set_receiver([this](const Frame& f) { engine_.on_glasses_frame(f); });
        glasses_down_.set_receiver([this](const Frame& f) { glasses_.on_frame(f); });

        for (double tap_s : scenario_.taps_s) {
            const auto at = static_cast<TimeMs>(std::llround(tap_s * 1000.0));
            scheduler_.schedule_at(at, [this] { glasses_.double_tap(); }, "tap");
        }
        scheduler_.schedule_at(0, [this] { engine_.start(); }, "start");
        schedule_next_beat();
    }

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Moves virtual time forward by `ms`. Past the scenario duration the
    /// watch is silent but timers (reveals, retries) keep firing.
    void advance(TimeMs ms) {
        if (ms < 0) throw ValidationError("ms", "advance must be non-negative");
        scheduler_.advance(scheduler_.now() + ms);
    }

    void advance_to(TimeMs t) { scheduler_.advance(t); }

    /// Runs to the end of the scenario, lets an in-flight capture settle,
    /// then stamps the store clock and writes the trigger log.
    SimulationSummary run() {
        if (scheduler_.now() < scenario_.duration_ms()) scheduler_.advance(scenario_.duration_ms());
        while (engine_.capture_in_flight()) {
            const auto next = scheduler_.next_time();
            if (!next) break;
            scheduler_.advance(*next);
        }
        finish();
        return summary();
    }

    void finish() {
        store_.record_clock(scheduler_.now());
        write_trigger_log();
    }

    void write_trigger_log() const {
        Store::write_file_atomic(store_dir_ / trigger_log_name, log_.text());
    }

    SimulationSummary summary() const {
        const auto& c = engine_.counters();
        return {c.captures_total, c.completes_total, c.failures_total, scheduler_.now()};
    }

    Scheduler& scheduler() noexcept { return scheduler_; }
    Store& store() noexcept { return store_; }
    EventLog& log() noexcept { return log_; }
    Engine& engine() noexcept { return engine_; }
    GlassesSim& glasses() noexcept { return glasses_; }
    const Scenario& scenario() const noexcept { return scenario_; }
    const SimLink& glasses_uplink() const noexcept { return glasses_up_; }
    const SimLink& glasses_downlink() const noexcept { return glasses_down_; }

private:
    void schedule_next_beat() {
        auto s = generator_.next();
        if (!s) return;
        scheduler_.schedule_at(
            s->t_ms,
            [this, sample = *s] {
                watch_link_.send(make_frame(FrameKind::rr_sample, std::nullopt, RrSampleMsg{sample}.encode()));
                schedule_next_beat();
            },
            "beat");
    }

    Scenario scenario_;
    SimulationOptions options_;
    FaultSchedule no_faults_{{}};
    FaultSchedule faults_;
    std::filesystem::path store_dir_;
    Scheduler scheduler_;
    EventLog log_;
    Store store_;
    SimLink watch_link_;
    SimLink glasses_up_;
    SimLink glasses_down_;
    RrGenerator generator_;
    GlassesSim glasses_;
    Engine engine_;
};

}  // namespace heartbeatcam
