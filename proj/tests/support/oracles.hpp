#pragma once

// Reference implementations used only by tests. Written directly from the
// definitions, deliberately naive, and sharing no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

struct Beat {
    std::int64_t t;
    double rr;
    std::uint64_t seq;
};

struct Rmssd {
    double rmssd;
    std::size_t n_beats;
    std::size_t n_diffs;
    double mean_hr;
};

/// Window is (end - len, end]; beats outside [300, 2000] never count; a
/// difference is taken only between beats whose seq values are consecutive.
inline std::optional<Rmssd> rmssd(const std::vector<Beat>& all, std::int64_t end, std::int64_t len = 25000,
                                  std::size_t min_beats = 10) {
    std::map<std::uint64_t, double> by_seq;
    long double sum_rr = 0;
    for (const auto& b : all) {
        if (b.rr < 300 || b.rr > 2000) continue;
        if (b.t <= end - len || b.t > end) continue;
        by_seq[b.seq] = b.rr;
        sum_rr += b.rr;
    }
    if (by_seq.size() < min_beats) return std::nullopt;
    long double sq = 0;
    std::size_t m = 0;
    for (const auto& [seq, rr] : by_seq) {
        auto next = by_seq.find(seq + 1);
        if (next == by_seq.end()) continue;
        const long double d = static_cast<long double>(next->second) - rr;
        sq += d * d;
        ++m;
    }
    if (m == 0) return std::nullopt;
    const auto n = by_seq.size();
    return Rmssd{static_cast<double>(std::sqrt(sq / m)), n, m, static_cast<double>(60000.0L / (sum_rr / n))};
}

inline double mean(const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return static_cast<double>(s / v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    const long double m = mean(v);
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(std::sqrt(s / (v.size() - 1)));
}

/// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        c ^= data[i];
        for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
    }
    return ~c;
}

inline std::uint32_t crc32(const std::vector<std::uint8_t>& v) { return crc32(v.data(), v.size()); }

/// Random RR stream with occasional out-of-range beats and seq gaps.
inline std::vector<Beat> random_stream(std::mt19937_64& rng, std::size_t n, bool with_artifacts = true) {
    std::uniform_real_distribution<double> rr(300.0, 2000.0);
    std::uniform_int_distribution<int> pct(0, 99);
    std::vector<Beat> out;
    std::int64_t t = 0;
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = rr(rng);
        if (with_artifacts && pct(rng) < 3) v = pct(rng) < 50 ? 250.0 : 2400.0;
        if (with_artifacts && pct(rng) < 3) seq += 2;  // dropped beat upstream
        else ++seq;
        t += static_cast<std::int64_t>(std::llround(std::clamp(v, 300.0, 2000.0)));
        out.push_back({t, v, seq});
    }
    return out;
}

}  // namespace oracle

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "hb") {
        static int counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(rd()) + "-" + std::to_string(++counter));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// All regular files under `dir` keyed by relative path, with contents.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = read_text(e.path());
    return out;
}

}  // namespace testutil
