#pragma once

// Local HTTP service over a store and (optionally) a running simulation.
//
// Handlers run on the HTTP thread pool. Anything that mutates the engine or
// the store is posted to a single worker thread and executed in arrival
// order; plain reads go straight to the store under its shared lock.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "heartbeatcam/simulation.hpp"
#include "heartbeatcam/store.hpp"

namespace heartbeatcam {

// ---------------------------------------------------------------------------

class CommandQueue {
public:
    CommandQueue() : worker_([this] { loop(); }) {}
    ~CommandQueue() { shutdown(); }

    CommandQueue(const CommandQueue&) = delete;
    CommandQueue& operator=(const CommandQueue&) = delete;

    template <class F>
    auto submit(F fn) -> std::future<decltype(fn())> {
        using R = decltype(fn());
        auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
        auto fut = task->get_future();
        {
            std::lock_guard lock(mutex_);
            if (stopping_) throw StateError("command queue is shut down");
            tasks_.emplace_back([task] { (*task)(); });
        }
        cv_.notify_one();
        return fut;
    }

    template <class F>
    auto run(F fn) -> decltype(fn()) {
        return submit(std::move(fn)).get();
    }

    void shutdown() {
        {
            std::lock_guard lock(mutex_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_one();
        if (worker_.joinable()) worker_.join();
    }

private:
    void loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
                if (tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop_front();
            }
            task();
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> tasks_;
    bool stopping_ = false;
    std::thread worker_;
};

// ---------------------------------------------------------------------------

/// Fan-out of log entries to SSE subscribers. Each subscriber has its own
/// bounded queue; a slow client loses its oldest entries, never blocks the
/// engine.
class Broadcaster {
public:
    struct Subscriber {
        std::mutex mutex;
        std::condition_variable cv;
        std::deque<std::string> pending;
        bool closed = false;
    };
    using Handle = std::shared_ptr<Subscriber>;

    explicit Broadcaster(std::size_t max_pending = 4096) : max_pending_(max_pending) {}

    Handle subscribe() {
        auto h = std::make_shared<Subscriber>();
        std::lock_guard lock(mutex_);
        subs_.insert(h);
        return h;
    }

    void unsubscribe(const Handle& h) {
        std::lock_guard lock(mutex_);
        subs_.erase(h);
    }

    void publish(const std::string& message) {
        std::lock_guard lock(mutex_);
        for (const auto& s : subs_) {
            {
                std::lock_guard sl(s->mutex);
                if (s->pending.size() >= max_pending_) s->pending.pop_front();
                s->pending.push_back(message);
            }
            s->cv.notify_one();
        }
    }

    void close_all() {
        std::lock_guard lock(mutex_);
        for (const auto& s : subs_) {
            {
                std::lock_guard sl(s->mutex);
                s->closed = true;
            }
            s->cv.notify_one();
        }
    }

    std::size_t subscriber_count() const {
        std::lock_guard lock(mutex_);
        return subs_.size();
    }

    /// Waits up to `timeout` for messages; returns nullopt once closed.
    static std::optional<std::deque<std::string>> take(const Handle& h, std::chrono::milliseconds timeout) {
        std::unique_lock lock(h->mutex);
        h->cv.wait_for(lock, timeout, [&] { return h->closed || !h->pending.empty(); });
        if (h->closed) return std::nullopt;
        std::deque<std::string> out;
        out.swap(h->pending);
        return out;
    }

private:
    std::size_t max_pending_;
    mutable std::mutex mutex_;
    std::set<Handle> subs_;
};

/// `id`, `event` and `data` lines of one server-sent event.
inline std::string sse_message(const LogEntry& e) {
    nlohmann::ordered_json data = e.details;
    data["t"] = e.t;
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + data.dump() + "\n\n";
}

// ---------------------------------------------------------------------------

struct GatewayOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path store_dir;
    std::optional<Scenario> scenario;
    SimulationOptions sim;
    StoreOptions store;          // used when no scenario is given
    double speed = 0.0;          // virtual ms per wall ms; 0 = advance only on request
    TimeMs pace_tick_ms = 50;    // wall-clock pacing granularity
    std::filesystem::path export_dir;  // defaults to <store>/exports
};

class Gateway {
public:
    explicit Gateway(GatewayOptions options) : options_(std::move(options)) {
        if (options_.store_dir.empty()) throw ValidationError("store", "store directory is required");
        if (options_.speed < 0) throw ValidationError("speed", "speed must be non-negative");
        if (options_.export_dir.empty()) options_.export_dir = options_.store_dir / "exports";
        if (options_.scenario) {
            sim_ = std::make_unique<Simulation>(*options_.scenario, options_.store_dir, options_.sim);
            sim_->advance(0);  // fire the start-up events so status reflects the engine
        } else {
            store_ = std::make_unique<Store>(options_.store_dir, options_.store);
            clock_ = std::make_unique<Scheduler>(store_->last_clock().value_or(0));
        }
        log().subscribe([this](const LogEntry& e) { broadcaster_.publish(sse_message(e)); });
        now_ = scheduler().now();
        // The default options add SO_REUSEPORT, which would let a second
        // server share a port that is already taken.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
        });
        routes();
    }

    ~Gateway() { stop(); }

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and starts serving. Throws Error if the port cannot be bound.
    void start() {
        if (running_) return;
        if (stopped_) throw StateError("gateway already stopped");
        if (options_.port == 0) {
            port_ = server_.bind_to_any_port(options_.host);
            if (port_ <= 0) throw Error("cannot bind " + options_.host);
        } else {
            if (!server_.bind_to_port(options_.host, options_.port))
                throw Error("cannot bind " + options_.host + ":" + std::to_string(options_.port) +
                            " (port in use?)");
            port_ = options_.port;
        }
        running_ = true;
        server_thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        if (options_.speed > 0) pacer_ = std::thread([this] { pace(); });
    }

    /// Stops serving; the simulation clock and trigger log are persisted.
    void stop() {
        if (stopped_) return;
        stopped_ = true;
        if (running_.exchange(false)) {
            {
                std::lock_guard lock(pace_mutex_);
                pace_stop_ = true;
            }
            pace_cv_.notify_all();
            if (pacer_.joinable()) pacer_.join();
            broadcaster_.close_all();
            server_.stop();
            if (server_thread_.joinable()) server_thread_.join();
        }
        queue_.run([this] {
            if (sim_) sim_->finish();
            else store().record_clock(scheduler().now());
        });
        queue_.shutdown();
    }

    int port() const noexcept { return port_; }
    bool running() const noexcept { return running_; }
    TimeMs now() const noexcept { return now_; }

    /// Advances virtual time on the worker thread.
    TimeMs advance(TimeMs ms) {
        return queue_.run([this, ms] {
            scheduler().advance(scheduler().now() + ms);
            now_ = scheduler().now();
            return now_.load();
        });
    }

    nlohmann::json status() {
        return queue_.run([this] { return status_locked(); });
    }

    std::size_t stream_subscribers() const { return broadcaster_.subscriber_count(); }

private:
    Store& store() { return sim_ ? sim_->store() : *store_; }
    Scheduler& scheduler() { return sim_ ? sim_->scheduler() : *clock_; }
    EventLog& log() { return sim_ ? sim_->log() : standalone_log_; }

    nlohmann::json status_locked() {
        using nlohmann::json;
        json j;
        if (sim_) {
            const auto& eng = sim_->engine();
            j["mode"] = to_string(eng.state().mode);
            j["baseline"] = eng.baseline() ? to_json(*eng.baseline()) : json(nullptr);
            const auto& r = eng.last_reading();
            j["current_rmssd"] = r ? json(r->rmssd_ms) : json(nullptr);
            j["current_hr"] = r ? json(r->mean_hr_bpm) : json(nullptr);
            j["captures_total"] = eng.counters().captures_total;
            j["failures_total"] = eng.counters().failures_total;
            j["simulation"] = true;
        } else {
            j["mode"] = to_string(Mode::idle);
            j["baseline"] = nullptr;
            j["current_rmssd"] = nullptr;
            j["current_hr"] = nullptr;
            std::size_t failures = 0;
            const auto events = store().events();
            for (const auto& e : events) failures += e.status == CaptureStatus::failed;
            j["captures_total"] = events.size();
            j["failures_total"] = failures;
            j["simulation"] = false;
        }
        j["sim_time"] = scheduler().now();
        j["event_count"] = store().event_count();
        return j;
    }

    void pace() {
        double carry = 0.0;
        std::unique_lock lock(pace_mutex_);
        while (!pace_stop_) {
            if (pace_cv_.wait_for(lock, std::chrono::milliseconds(options_.pace_tick_ms), [this] { return pace_stop_; }))
                break;
            carry += static_cast<double>(options_.pace_tick_ms) * options_.speed;
            const auto step = static_cast<TimeMs>(carry);
            carry -= static_cast<double>(step);
            if (step == 0) continue;
            lock.unlock();
            try {
                advance(step);
            } catch (const std::exception&) {
                lock.lock();
                break;
            }
            lock.lock();
        }
    }

    // -- HTTP plumbing -------------------------------------------------------

    static void reply(httplib::Response& res, int code, const nlohmann::json& body) {
        res.status = code;
        res.set_content(body.dump(), "application/json");
    }

    static void reply_error(httplib::Response& res, int code, const std::string& message,
                            const std::string& field = {}) {
        nlohmann::json body{{"error", message}};
        if (!field.empty()) body["field"] = field;
        reply(res, code, body);
    }

    template <class F>
    static void guarded(httplib::Response& res, F&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            reply_error(res, 400, e.what(), e.field());
        } catch (const ParseError& e) {
            reply_error(res, 400, e.what(), e.field());
        } catch (const nlohmann::json::exception& e) {
            reply_error(res, 400, e.what());
        } catch (const NotFound& e) {
            reply_error(res, 404, e.what());
        } catch (const Conflict& e) {
            reply_error(res, 409, e.what());
        } catch (const StateError& e) {
            reply_error(res, 409, e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    }

    static std::optional<TimeMs> time_param(const httplib::Request& req, const char* name) {
        if (!req.has_param(name)) return std::nullopt;
        const auto raw = req.get_param_value(name);
        try {
            std::size_t used = 0;
            const auto v = std::stoll(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ValidationError(name, std::string(name) + " must be an integer millisecond timestamp");
        }
    }

    static CaptureId id_of(const httplib::Request& req) {
        try {
            return static_cast<CaptureId>(std::stoul(req.matches[1].str()));
        } catch (const std::exception&) {
            throw NotFound("no event " + req.matches[1].str());
        }
    }

    static nlohmann::json body_of(const httplib::Request& req) {
        if (req.body.empty()) return nlohmann::json::object();
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded()) throw ParseError(0, "body", "request body is not valid JSON");
        return j;
    }

    static nlohmann::json event_json(const EventView& v) {
        auto j = to_json(v);
        const std::string base = "/api/events/" + std::to_string(v.event.id);
        j["image_url"] = v.event.image_ref ? nlohmann::json(base + "/image") : nlohmann::json(nullptr);
        j["audio_url"] = v.event.audio_ref ? nlohmann::json(base + "/audio") : nlohmann::json(nullptr);
        return j;
    }

    void routes() {
        using httplib::Request;
        using httplib::Response;

        server_.Get("/api/status", [this](const Request&, Response& res) {
            guarded(res, [&] { reply(res, 200, status()); });
        });

        server_.Get("/api/events", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                EventFilter f;
                f.from = time_param(req, "from");
                f.to = time_param(req, "to");
                if (req.has_param("status")) {
                    f.status = parse_capture_status(req.get_param_value("status"));
                    if (!f.status) throw ValidationError("status", "status must be complete or failed");
                }
                auto out = nlohmann::json::array();
                for (const auto& v : store().list_events(now_, f)) out.push_back(event_json(v));
                reply(res, 200, out);
            });
        });

        server_.Get(R"(/api/events/(\d+))", [this](const Request& req, Response& res) {
            guarded(res, [&] { reply(res, 200, event_json(store().view_event(id_of(req), now_))); });
        });

        server_.Get(R"(/api/events/(\d+)/(image|audio))", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                const bool image = req.matches[2] == "image";
                auto blob = store().read_blob(id_of(req), image ? BlobKind::image : BlobKind::audio, now_);
                if (!blob) {
                    reply_error(res, 404, "blob not available");
                    return;
                }
                res.status = 200;
                res.set_content(std::string(blob->begin(), blob->end()),
                                image ? "image/x-portable-graymap" : "audio/wav");
            });
        });

        server_.Post(R"(/api/events/(\d+)/annotations)", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                const auto id = id_of(req);
                auto a = annotation_from_json(body_of(req));
                auto view = queue_.run([&] { return store().annotate(id, a, scheduler().now()); });
                reply(res, 201, event_json(view));
            });
        });

        server_.Get("/api/templates", [this](const Request&, Response& res) {
            guarded(res, [&] {
                auto out = nlohmann::json::array();
                for (const auto& t : store().templates()) out.push_back(to_json(t));
                reply(res, 200, out);
            });
        });

        server_.Post("/api/templates", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                auto t = template_from_json(body_of(req));
                queue_.run([&] { store().add_template(t); });
                reply(res, 201, to_json(t));
            });
        });

        server_.Post("/api/export", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                ExportFilter f;
                if (body.contains("from") && !body["from"].is_null()) f.from = body["from"].get<TimeMs>();
                if (body.contains("to") && !body["to"].is_null()) f.to = body["to"].get<TimeMs>();
                f.include_unrevealed = body.value("include_unrevealed", false);
                f.include_failed = body.value("include_failed", true);
                auto result = queue_.run([&] {
                    const TimeMs t = scheduler().now();
                    const auto name = "export-" + std::to_string(t) + "-" + std::to_string(++export_seq_) + ".zip";
                    return store().export_to(f, t, options_.export_dir / name);
                });
                reply(res, 200, {{"archive_path", result.archive_path.string()}, {"event_count", result.event_count}});
            });
        });

        server_.Post("/api/sim/pause-toggle", [this](const Request&, Response& res) {
            guarded(res, [&] {
                if (!sim_) throw StateError("no simulation is running");
                const TimeMs t = queue_.run([&] {
                    sim_->glasses().double_tap();
                    return scheduler().now();
                });
                reply(res, 202, {{"tap_sent_at", t}});
            });
        });

        server_.Post("/api/sim/advance", [this](const Request& req, Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                if (!body.contains("ms") || !body["ms"].is_number_integer())
                    throw ValidationError("ms", "ms must be an integer");
                const auto ms = body["ms"].get<TimeMs>();
                if (ms < 0) throw ValidationError("ms", "ms must be non-negative");
                reply(res, 200, {{"sim_time", advance(ms)}});
            });
        });

        server_.Get("/api/stream", [this](const Request&, Response& res) {
            auto sub = broadcaster_.subscribe();
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [this, sub](std::size_t, httplib::DataSink& sink) {
                    if (!running_) return false;
                    auto batch = Broadcaster::take(sub, std::chrono::milliseconds(250));
                    if (!batch) return false;
                    if (batch->empty()) {
                        static constexpr char keepalive[] = ": keepalive\n\n";
                        return sink.write(keepalive, sizeof(keepalive) - 1);
                    }
                    for (const auto& m : *batch)
                        if (!sink.write(m.data(), m.size())) return false;
                    return true;
                },
                [this, sub](bool) { broadcaster_.unsubscribe(sub); });
        });
    }

    GatewayOptions options_;
    std::unique_ptr<Simulation> sim_;
    std::unique_ptr<Store> store_;
    std::unique_ptr<Scheduler> clock_;
    EventLog standalone_log_;
    Broadcaster broadcaster_;
    std::atomic<TimeMs> now_{0};
    std::atomic<bool> running_{false};
    bool stopped_ = false;
    std::size_t export_seq_ = 0;
    int port_ = 0;
    httplib::Server server_;
    std::thread server_thread_;
    std::thread pacer_;
    std::mutex pace_mutex_;
    std::condition_variable pace_cv_;
    bool pace_stop_ = false;
    CommandQueue queue_;
};

}  // namespace heartbeatcam
