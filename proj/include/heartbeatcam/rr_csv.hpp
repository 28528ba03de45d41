#pragma once

// RR replay files (`t_ms,rr_ms,seq`) and the analysis CSV
// (`window_end_ms,rmssd_ms,n_beats,mean_hr,state`).

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hrv.hpp"

namespace heartbeatcam {

inline constexpr std::string_view rr_csv_header = "t_ms,rr_ms,seq";
inline constexpr std::string_view analysis_csv_header = "window_end_ms,rmssd_ms,n_beats,mean_hr,state";

namespace csv_detail {

template <class T>
T parse_cell(std::string_view cell, std::size_t line, const char* field) {
    T v{};
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end || cell.empty())
        throw ParseError(line, field, std::string(field) + ": cannot parse '" + std::string(cell) + "'");
    return v;
}

}  // namespace csv_detail

/// Parses an RR replay file. The header row is required. Order and sequence
/// numbers are checked here so that errors can name a line.
inline std::vector<RrSample> read_rr_csv(std::istream& in) {
    std::vector<RrSample> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (n == 1) {
            if (line != rr_csv_header)
                throw ParseError(1, "header", "expected header '" + std::string(rr_csv_header) + "'");
            continue;
        }
        if (line.empty()) continue;
        std::string_view v(line);
        const auto c1 = v.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
        if (c2 == std::string_view::npos || v.find(',', c2 + 1) != std::string_view::npos)
            throw ParseError(n, "row", "expected 3 columns");
        RrSample s;
        s.t_ms = csv_detail::parse_cell<TimeMs>(v.substr(0, c1), n, "t_ms");
        s.rr_ms = csv_detail::parse_cell<double>(v.substr(c1 + 1, c2 - c1 - 1), n, "rr_ms");
        s.seq = csv_detail::parse_cell<std::uint64_t>(v.substr(c2 + 1), n, "seq");
        if (!(s.rr_ms > 0)) throw ParseError(n, "rr_ms", "rr_ms must be positive");
        if (!out.empty()) {
            if (s.seq <= out.back().seq) throw ParseError(n, "seq", "seq must strictly increase");
            if (s.t_ms < out.back().t_ms) throw ParseError(n, "t_ms", "t_ms must not decrease");
        }
        out.push_back(s);
    }
    if (n == 0) throw ParseError(1, "header", "empty file");
    return out;
}

inline std::vector<RrSample> read_rr_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_rr_csv(in);
}

inline void write_rr_csv(std::ostream& out, const std::vector<RrSample>& samples) {
    out << rr_csv_header << '\n';
    for (const auto& s : samples) out << s.t_ms << ',' << nlohmann::json(s.rr_ms).dump() << ',' << s.seq << '\n';
}

struct AnalysisRow {
    TimeMs window_end_ms = 0;
    std::optional<HrvReading> reading;
    StressState state = StressState::insufficient_data;
};

struct AnalysisOptions {
    WindowConfig window;
    ValidationRange range;
    std::optional<Baseline> baseline;  // none: calibrate on the file itself
    std::size_t min_samples = default_min_calibration_samples;
    double k = default_threshold_k;
};

/// Readings after the whole input, for calibration.
inline std::vector<HrvReading> rr_readings(const std::vector<RrSample>& samples, WindowConfig window = {},
                                           ValidationRange range = {}) {
    RmssdStream stream(window, range);
    std::vector<HrvReading> out;
    for (const auto& s : samples)
        if (auto r = stream.push(s).reading) out.push_back(*r);
    return out;
}

/// One row per accepted sample; readings without enough beats carry
/// InsufficientData.
inline std::vector<AnalysisRow> analyze_rr(const std::vector<RrSample>& samples, const AnalysisOptions& opt) {
    Baseline baseline;
    if (opt.baseline) {
        baseline = *opt.baseline;
    } else {
        const auto readings = rr_readings(samples, opt.window, opt.range);
        baseline = calibrate(readings, opt.min_samples, opt.k);
    }
    RmssdStream stream(opt.window, opt.range);
    std::vector<AnalysisRow> rows;
    for (const auto& s : samples) {
        auto r = stream.push(s);
        if (!r.accepted) continue;
        AnalysisRow row;
        row.window_end_ms = s.t_ms;
        row.reading = r.reading;
        row.state = classify(r.reading, baseline);
        rows.push_back(row);
    }
    return rows;
}

inline void write_analysis_csv(std::ostream& out, const std::vector<AnalysisRow>& rows, bool include_insufficient) {
    out << analysis_csv_header << '\n';
    for (const auto& row : rows) {
        if (!row.reading) {
            if (include_insufficient) out << row.window_end_ms << ",,,," << to_string(row.state) << '\n';
            continue;
        }
        const auto& r = *row.reading;
        out << row.window_end_ms << ',' << nlohmann::json(r.rmssd_ms).dump() << ',' << r.n_beats << ','
            << nlohmann::json(r.mean_hr_bpm).dump() << ',' << to_string(row.state) << '\n';
    }
}

}  // namespace heartbeatcam
