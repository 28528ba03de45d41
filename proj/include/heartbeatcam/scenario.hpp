#pragma once

// Simulation scenario: resting physiology, scripted stress episodes, taps and
// link faults, all reproducible from one seed. JSON schema in
// schemas/scenario.schema.json.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hrv.hpp"

namespace heartbeatcam {

struct Episode {
    double start_s = 0.0;
    double duration_s = 0.0;
    double hr_increase_pct = 0.0;
    double jitter_suppression_pct = 0.0;
};

enum class FaultKind { disconnect, latency, drop_pct, corrupt_pct };

constexpr std::string_view to_string(FaultKind k) noexcept {
    switch (k) {
        case FaultKind::disconnect: return "disconnect";
        case FaultKind::latency: return "latency";
        case FaultKind::drop_pct: return "drop_pct";
        case FaultKind::corrupt_pct: return "corrupt_pct";
    }
    return "unknown";
}

struct Fault {
    double start_s = 0.0;
    double duration_s = 0.0;
    FaultKind kind = FaultKind::disconnect;
    double pct = 0.0;         // drop_pct, corrupt_pct: per-frame probability in percent
    double latency_ms = 0.0;  // latency: maximum added delay

    TimeMs start_ms() const noexcept { return static_cast<TimeMs>(std::llround(start_s * 1000.0)); }
    TimeMs end_ms() const noexcept {
        return static_cast<TimeMs>(std::llround((start_s + duration_s) * 1000.0));
    }
    /// Active on [start, end).
    bool active_at(TimeMs t) const noexcept { return t >= start_ms() && t < end_ms(); }
};

struct Scenario {
    double duration_s = 0.0;
    double rr_mean_ms = 800.0;
    double rr_jitter_ms = 40.0;
    std::vector<Episode> episodes;
    std::vector<double> taps_s;
    std::vector<Fault> faults;
    std::uint64_t seed = 0;

    TimeMs duration_ms() const noexcept { return static_cast<TimeMs>(std::llround(duration_s * 1000.0)); }
};

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError(0, where + key, "missing field '" + where + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw ParseError(0, where + key, "field '" + where + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(0, where + key, "field '" + where + key + "' must be finite");
    return d;
}

inline void check_span(double start, double dur, double total, const std::string& where) {
    if (start < 0 || dur < 0 || start + dur > total)
        throw ValidationError(where, where + " must lie within [0, duration]");
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError(0, "", "scenario must be a JSON object");
    Scenario s;
    s.duration_s = detail::require_number(j, "duration", "");
    s.rr_mean_ms = detail::require_number(j, "rr_mean", "");
    s.rr_jitter_ms = detail::require_number(j, "rr_jitter", "");
    if (!j.contains("seed") || !j.at("seed").is_number_integer())
        throw ParseError(0, "seed", "field 'seed' must be an integer");
    s.seed = j.at("seed").is_number_unsigned() ? j.at("seed").get<std::uint64_t>()
                                               : static_cast<std::uint64_t>(j.at("seed").get<std::int64_t>());

    if (s.duration_s <= 0) throw ValidationError("duration", "duration must be positive");
    if (s.rr_mean_ms < 300 || s.rr_mean_ms > 2000)
        throw ValidationError("rr_mean", "rr_mean must lie in [300, 2000] ms");
    if (s.rr_jitter_ms < 0) throw ValidationError("rr_jitter", "rr_jitter must be non-negative");

    auto array_of = [&](const char* key) -> const nlohmann::json* {
        if (!j.contains(key)) return nullptr;
        if (!j.at(key).is_array()) throw ParseError(0, key, std::string("field '") + key + "' must be an array");
        return &j.at(key);
    };

    if (const auto* eps = array_of("episodes")) {
        for (std::size_t i = 0; i < eps->size(); ++i) {
            const auto& e = (*eps)[i];
            const std::string where = "episodes[" + std::to_string(i) + "].";
            Episode ep;
            ep.start_s = detail::require_number(e, "start_s", where);
            ep.duration_s = detail::require_number(e, "duration_s", where);
            ep.hr_increase_pct = detail::require_number(e, "hr_increase_pct", where);
            ep.jitter_suppression_pct = detail::require_number(e, "jitter_suppression_pct", where);
            detail::check_span(ep.start_s, ep.duration_s, s.duration_s, where.substr(0, where.size() - 1));
            if (ep.hr_increase_pct < 0 || ep.jitter_suppression_pct < 0 || ep.jitter_suppression_pct > 100)
                throw ValidationError(where + "jitter_suppression_pct", "episode percentages out of range");
            s.episodes.push_back(ep);
        }
    }
    if (const auto* taps = array_of("taps")) {
        for (std::size_t i = 0; i < taps->size(); ++i) {
            const auto& t = (*taps)[i];
            const std::string where = "taps[" + std::to_string(i) + "]";
            if (!t.is_number()) throw ParseError(0, where, where + " must be a number of seconds");
            const double v = t.get<double>();
            detail::check_span(v, 0, s.duration_s, where);
            s.taps_s.push_back(v);
        }
    }
    if (const auto* faults = array_of("faults")) {
        for (std::size_t i = 0; i < faults->size(); ++i) {
            const auto& f = (*faults)[i];
            const std::string where = "faults[" + std::to_string(i) + "].";
            Fault flt;
            flt.start_s = detail::require_number(f, "start_s", where);
            flt.duration_s = detail::require_number(f, "duration_s", where);
            if (!f.contains("kind") || !f.at("kind").is_string())
                throw ParseError(0, where + "kind", "field '" + where + "kind' must be a string");
            const auto kind = f.at("kind").get<std::string>();
            if (kind == "disconnect") {
                flt.kind = FaultKind::disconnect;
            } else if (kind == "latency") {
                flt.kind = FaultKind::latency;
                flt.latency_ms = detail::require_number(f, "latency_ms", where);
                if (flt.latency_ms < 0) throw ValidationError(where + "latency_ms", "latency must be non-negative");
            } else if (kind == "drop_pct" || kind == "corrupt_pct") {
                flt.kind = kind == "drop_pct" ? FaultKind::drop_pct : FaultKind::corrupt_pct;
                flt.pct = detail::require_number(f, "pct", where);
                if (flt.pct < 0 || flt.pct > 100) throw ValidationError(where + "pct", "pct must lie in [0, 100]");
            } else {
                throw ParseError(0, where + "kind", "unknown fault kind '" + kind + "'");
            }
            detail::check_span(flt.start_s, flt.duration_s, s.duration_s, where.substr(0, where.size() - 1));
            s.faults.push_back(flt);
        }
    }
    return s;
}

inline nlohmann::json to_json(const Scenario& s) {
    nlohmann::json j;
    j["duration"] = s.duration_s;
    j["rr_mean"] = s.rr_mean_ms;
    j["rr_jitter"] = s.rr_jitter_ms;
    j["episodes"] = nlohmann::json::array();
    for (const auto& e : s.episodes)
        j["episodes"].push_back({{"start_s", e.start_s},
                                 {"duration_s", e.duration_s},
                                 {"hr_increase_pct", e.hr_increase_pct},
                                 {"jitter_suppression_pct", e.jitter_suppression_pct}});
    j["taps"] = s.taps_s;
    j["faults"] = nlohmann::json::array();
    for (const auto& f : s.faults) {
        nlohmann::json fj{{"start_s", f.start_s}, {"duration_s", f.duration_s}, {"kind", to_string(f.kind)}};
        if (f.kind == FaultKind::latency) fj["latency_ms"] = f.latency_ms;
        if (f.kind == FaultKind::drop_pct || f.kind == FaultKind::corrupt_pct) fj["pct"] = f.pct;
        j["faults"].push_back(fj);
    }
    j["seed"] = s.seed;
    return j;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "", "cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, "", "scenario is not valid JSON: " + std::string(e.what()));
    }
    return scenario_from_json(j);
}

}  // namespace heartbeatcam
