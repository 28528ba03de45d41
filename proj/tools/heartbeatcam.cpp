// heartbeatcam command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 bad input data, 3 runtime failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "heartbeatcam/gateway.hpp"
#include "heartbeatcam/rr_csv.hpp"
#include "heartbeatcam/scenario.hpp"
#include "heartbeatcam/simulation.hpp"
#include "heartbeatcam/store.hpp"

namespace hb = heartbeatcam;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, runtime = 3 };

std::atomic<bool> interrupted{false};

void on_signal(int) { interrupted = true; }

hb::Baseline load_baseline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hb::Error("cannot open " + path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw hb::ParseError(0, "baseline", path + ": not a JSON object");
    hb::Baseline b;
    for (const char* key : {"mean", "sd"})
        if (!j.contains(key) || !j[key].is_number())
            throw hb::ParseError(0, key, path + ": missing numeric field '" + key + "'");
    b.mean = j["mean"].get<double>();
    b.sd = j["sd"].get<double>();
    b.k = j.value("k", hb::default_threshold_k);
    b.n_samples = j.value("n_samples", std::size_t{0});
    if (b.sd < 0) throw hb::ValidationError("sd", path + ": sd must be non-negative");
    return b;
}

struct EngineFlags {
    std::int64_t calibration_ms = 7LL * 24 * 3600 * 1000;
    std::size_t min_samples = hb::default_min_calibration_samples;
    double k = hb::default_threshold_k;
    std::int64_t reveal_delay_ms = hb::default_reveal_delay_ms;
    std::int64_t min_interval_ms = 60'000;
    unsigned debounce = 1;
    bool edge = false;

    void add(CLI::App* app) {
        app->add_option("--calibration-ms", calibration_ms, "Calibration period in stream time")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--min-samples", min_samples, "Minimum readings for a baseline");
        app->add_option("--k", k, "Threshold multiplier")->check(CLI::NonNegativeNumber);
        app->add_option("--reveal-delay-ms", reveal_delay_ms, "Delay before blobs are revealed")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--min-interval-ms", min_interval_ms, "Minimum time between captures")
            ->check(CLI::PositiveNumber);
        app->add_option("--debounce", debounce, "Consecutive stressed readings before a capture")
            ->check(CLI::Range(1u, 1000u));
        app->add_flag("--edge", edge, "Capture once per stressed run instead of every interval");
    }

    hb::SimulationOptions sim_options() const {
        hb::SimulationOptions o;
        o.engine.hrv.calibration_ms = calibration_ms;
        o.engine.hrv.min_calibration_samples = min_samples;
        o.engine.hrv.k = k;
        o.engine.trigger.min_capture_interval_ms = min_interval_ms;
        o.engine.trigger.debounce_count = debounce;
        o.engine.trigger.retrigger_while_stressed = !edge;
        o.store.reveal_delay_ms = reveal_delay_ms;
        return o;
    }
};

int run_analyze(const std::string& file, const std::optional<std::string>& baseline_path, std::size_t min_samples,
                double k, bool include_insufficient) {
    hb::AnalysisOptions opt;
    opt.min_samples = min_samples;
    opt.k = k;
    if (baseline_path) opt.baseline = load_baseline(*baseline_path);
    const auto rows = hb::analyze_rr(hb::read_rr_csv(file), opt);
    hb::write_analysis_csv(std::cout, rows, include_insufficient);
    return ok;
}

int run_calibrate(const std::string& file, std::size_t min_samples, double k) {
    const auto readings = hb::rr_readings(hb::read_rr_csv(file));
    const auto b = hb::calibrate(readings, min_samples, k);
    nlohmann::ordered_json j;
    j["mean"] = b.mean;
    j["sd"] = b.sd;
    j["n_samples"] = b.n_samples;
    j["threshold"] = b.threshold();
    j["k"] = b.k;
    j["period_start"] = b.period_start;
    j["period_end"] = b.period_end;
    std::cout << j.dump(2) << '\n';
    return ok;
}

int run_simulate(const std::string& scenario_path, const std::string& store, const EngineFlags& flags) {
    const auto scenario = hb::load_scenario(scenario_path);
    hb::Simulation sim(scenario, store, flags.sim_options());
    const auto s = sim.run();
    std::cout << "captures: " << s.captures << '\n'
              << "complete: " << s.complete << '\n'
              << "failures: " << s.failures << '\n';
    return ok;
}

int run_serve(const std::string& store, const std::optional<std::string>& scenario_path, double speed,
              const std::string& host, int port, const EngineFlags& flags) {
    hb::GatewayOptions opt;
    opt.store_dir = store;
    opt.host = host;
    opt.port = port;
    opt.speed = speed;
    opt.sim = flags.sim_options();
    opt.store.reveal_delay_ms = flags.reveal_delay_ms;
    if (scenario_path) opt.scenario = hb::load_scenario(*scenario_path);
    hb::Gateway gateway(opt);
    gateway.start();
    std::cerr << "serving on http://" << host << ':' << gateway.port() << '\n';
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    gateway.stop();
    return ok;
}

int run_export(const std::string& store_dir, const std::string& out, std::optional<std::int64_t> from,
               std::optional<std::int64_t> to, bool include_unrevealed, bool exclude_failed,
               std::optional<std::int64_t> now) {
    if (!std::filesystem::exists(store_dir)) throw hb::Error("no store at " + store_dir);
    hb::Store store(store_dir);
    hb::ExportFilter f;
    f.from = from;
    f.to = to;
    f.include_unrevealed = include_unrevealed;
    f.include_failed = !exclude_failed;
    const auto t = now ? *now : store.last_clock().value_or(0);
    const auto result = store.export_to(f, t, out);
    std::cout << "archive: " << result.archive_path.string() << '\n' << "events: " << result.event_count << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HeartbeatCam: HRV-triggered capture pipeline"};
    app.require_subcommand(1);

    std::string file, store, out, host = "127.0.0.1";
    std::optional<std::string> baseline_path, scenario_path;
    std::size_t min_samples = hb::default_min_calibration_samples;
    double k = hb::default_threshold_k;
    double speed = 1.0;
    int port = 8080;
    bool include_insufficient = false, include_unrevealed = false, exclude_failed = false;
    std::optional<std::int64_t> from, to, now;
    EngineFlags flags;

    auto* analyze = app.add_subcommand("analyze", "RMSSD series of an RR file as CSV on stdout");
    analyze->add_option("rr_csv", file, "RR file (t_ms,rr_ms,seq)")->required();
    analyze->add_option("--baseline", baseline_path, "Baseline JSON from 'calibrate'; default: calibrate on the file");
    analyze->add_option("--min-samples", min_samples, "Minimum readings when self-calibrating");
    analyze->add_option("--k", k, "Threshold multiplier when self-calibrating")->check(CLI::NonNegativeNumber);
    analyze->add_flag("--include-insufficient", include_insufficient, "Also print rows without enough beats");

    auto* cal = app.add_subcommand("calibrate", "Baseline JSON from an RR file");
    cal->add_option("rr_csv", file, "RR file (t_ms,rr_ms,seq)")->required();
    cal->add_option("--min-samples", min_samples, "Minimum readings");
    cal->add_option("--k", k, "Threshold multiplier")->check(CLI::NonNegativeNumber);

    auto* sim = app.add_subcommand("simulate", "Run a scenario to completion in virtual time");
    sim->add_option("scenario", file, "Scenario JSON")->required();
    sim->add_option("--store", store, "Store directory (must be empty or absent)")->required();
    flags.add(sim);

    auto* serve = app.add_subcommand("serve", "Run the local HTTP API");
    serve->add_option("--store", store, "Store directory")->required();
    serve->add_option("--scenario", scenario_path, "Scenario to run under the service clock");
    serve->add_option("--speed", speed, "Virtual milliseconds per wall millisecond; 0 = manual advance")
        ->check(CLI::NonNegativeNumber);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));
    EngineFlags serve_flags;
    serve_flags.add(serve);

    auto* exp = app.add_subcommand("export", "Write a review archive");
    exp->add_option("--store", store, "Store directory")->required();
    exp->add_option("--out", out, "Archive path (.zip)")->required();
    exp->add_option("--from", from, "Earliest captured_at, inclusive (ms)");
    exp->add_option("--to", to, "Latest captured_at, exclusive (ms)");
    exp->add_flag("--include-unrevealed", include_unrevealed, "Add metadata of unrevealed events");
    exp->add_flag("--exclude-failed", exclude_failed, "Leave out failed captures");
    exp->add_option("--now", now, "Virtual time for reveal decisions; default: the store's clock");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*analyze) return run_analyze(file, baseline_path, min_samples, k, include_insufficient);
        if (*cal) return run_calibrate(file, min_samples, k);
        if (*sim) return run_simulate(file, store, flags);
        if (*serve) return run_serve(store, scenario_path, speed, host, port, serve_flags);
        if (*exp) return run_export(store, out, from, to, include_unrevealed, exclude_failed, now);
    } catch (const hb::ParseError& e) {
        std::cerr << "error: " << e.what() << " [" << e.field() << "]\n";
        return data;
    } catch (const hb::ValidationError& e) {
        std::cerr << "error: " << e.what() << " [" << e.field() << "]\n";
        return data;
    } catch (const hb::NotEnoughData& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime;
    }
    return usage;
}
