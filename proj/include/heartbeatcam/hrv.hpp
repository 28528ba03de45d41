#pragma once

// Ultra-short HRV: RR validation, windowed RMSSD, baseline calibration and
// stress classification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <variant>

#include "heartbeatcam/error.hpp"

namespace heartbeatcam {

/// Milliseconds since the session epoch.
using TimeMs = std::int64_t;

struct RrSample {
    TimeMs t_ms = 0;
    double rr_ms = 0.0;
    std::uint64_t seq = 0;

    friend bool operator==(const RrSample&, const RrSample&) = default;
};

/// Inclusive physiological range for accepted RR intervals (~30 to 200 bpm).
struct ValidationRange {
    double min_ms = 300.0;
    double max_ms = 2000.0;
};

enum class RejectReason { out_of_range };

constexpr std::string_view to_string(RejectReason r) noexcept {
    switch (r) {
        case RejectReason::out_of_range: return "out_of_range";
    }
    return "unknown";
}

struct Rejection {
    RejectReason reason;
    RrSample sample;
};

using ValidationResult = std::variant<RrSample, Rejection>;

inline ValidationResult validate_rr(const RrSample& sample, const ValidationRange& range = {}) {
    // Written so that NaN falls through to rejection.
    if (sample.rr_ms >= range.min_ms && sample.rr_ms <= range.max_ms) return sample;
    return Rejection{RejectReason::out_of_range, sample};
}

inline bool accepted(const ValidationResult& r) noexcept {
    return std::holds_alternative<RrSample>(r);
}

struct WindowConfig {
    TimeMs length_ms = 25'000;
    std::size_t min_beats = 10;
};

struct HrvReading {
    TimeMs window_end_ms = 0;
    double rmssd_ms = 0.0;
    std::size_t n_beats = 0;
    std::size_t n_diffs = 0;
    double mean_hr_bpm = 0.0;

    friend bool operator==(const HrvReading&, const HrvReading&) = default;
};

enum class StressState { calm, stressed, insufficient_data };

constexpr std::string_view to_string(StressState s) noexcept {
    switch (s) {
        case StressState::calm: return "calm";
        case StressState::stressed: return "stressed";
        case StressState::insufficient_data: return "insufficient_data";
    }
    return "unknown";
}

/// RMSSD over accepted samples with t in (window_end - length, window_end].
///
/// Successive differences are taken only between samples whose sequence
/// numbers are adjacent, so a dropped or rejected beat removes the pair that
/// straddles it. Returns nullopt (insufficient data) when the window holds
/// fewer than `min_beats` samples or no adjacent pair at all.
inline std::optional<HrvReading> window_rmssd(std::span<const RrSample> samples,
                                              TimeMs window_end,
                                              const WindowConfig& config = {}) {
    const TimeMs start = window_end - config.length_ms;
    auto first = std::upper_bound(samples.begin(), samples.end(), start,
                                  [](TimeMs t, const RrSample& s) { return t < s.t_ms; });
    auto last = std::upper_bound(first, samples.end(), window_end,
                                 [](TimeMs t, const RrSample& s) { return t < s.t_ms; });

    const auto n = static_cast<std::size_t>(last - first);
    if (n < config.min_beats || n == 0) return std::nullopt;

    double sum_rr = 0.0;
    double sum_sq = 0.0;
    std::size_t diffs = 0;
    for (auto it = first; it != last; ++it) {
        sum_rr += it->rr_ms;
        if (it != first) {
            const auto& prev = *(it - 1);
            if (it->seq == prev.seq + 1) {
                const double d = it->rr_ms - prev.rr_ms;
                sum_sq += d * d;
                ++diffs;
            }
        }
    }
    if (diffs == 0) return std::nullopt;

    HrvReading r;
    r.window_end_ms = window_end;
    r.rmssd_ms = std::sqrt(sum_sq / static_cast<double>(diffs));
    r.n_beats = n;
    r.n_diffs = diffs;
    r.mean_hr_bpm = 60'000.0 / (sum_rr / static_cast<double>(n));
    return r;
}

/// Personal RMSSD statistics. `sd` is the sample (n-1) standard deviation.
struct Baseline {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n_samples = 0;
    TimeMs period_start = 0;
    TimeMs period_end = 0;
    double k = 1.5;

    double threshold() const noexcept { return mean - k * sd; }

    friend bool operator==(const Baseline&, const Baseline&) = default;
};

inline constexpr std::size_t default_min_calibration_samples = 100;
inline constexpr double default_threshold_k = 1.5;

inline Baseline calibrate(std::span<const HrvReading> readings,
                          std::size_t min_samples = default_min_calibration_samples,
                          double k = default_threshold_k) {
    const std::size_t n = readings.size();
    if (n < min_samples || n == 0) throw NotEnoughData(n, min_samples);

    double sum = 0.0;
    TimeMs lo = readings.front().window_end_ms;
    TimeMs hi = lo;
    for (const auto& r : readings) {
        sum += r.rmssd_ms;
        lo = std::min(lo, r.window_end_ms);
        hi = std::max(hi, r.window_end_ms);
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : readings) ss += (r.rmssd_ms - mean) * (r.rmssd_ms - mean);

    Baseline b;
    b.mean = mean;
    b.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    b.n_samples = n;
    b.period_start = lo;
    b.period_end = hi;
    b.k = k;
    return b;
}

/// Stressed iff the reading drops strictly below mean - k*sd.
inline StressState classify(const HrvReading& reading, const Baseline& baseline) noexcept {
    return reading.rmssd_ms < baseline.threshold() ? StressState::stressed : StressState::calm;
}

inline StressState classify(const std::optional<HrvReading>& reading,
                            const Baseline& baseline) noexcept {
    return reading ? classify(*reading, baseline) : StressState::insufficient_data;
}

/// Online counterpart of calibrate() (Welford) for week-long calibration
/// periods where keeping every reading around is pointless.
class BaselineAccumulator {
public:
    void add(const HrvReading& r) {
        if (count_ == 0) {
            start_ = end_ = r.window_end_ms;
        } else {
            start_ = std::min(start_, r.window_end_ms);
            end_ = std::max(end_, r.window_end_ms);
        }
        ++count_;
        const double delta = r.rmssd_ms - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (r.rmssd_ms - mean_);
    }

    std::size_t count() const noexcept { return count_; }

    Baseline finish(std::size_t min_samples = default_min_calibration_samples,
                    double k = default_threshold_k) const {
        if (count_ < min_samples || count_ == 0) throw NotEnoughData(count_, min_samples);
        Baseline b;
        b.mean = mean_;
        b.sd = count_ > 1 ? std::sqrt(std::max(0.0, m2_) / static_cast<double>(count_ - 1)) : 0.0;
        b.n_samples = count_;
        b.period_start = start_;
        b.period_end = end_;
        b.k = k;
        return b;
    }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    TimeMs start_ = 0;
    TimeMs end_ = 0;
};

/// Event-driven sliding-window RMSSD: one reading attempt per accepted sample,
/// with the window ending at that sample's timestamp.
///
/// Running sums are updated in O(1) per sample and rebuilt from the window
/// contents once the window has turned over, which bounds floating drift on
/// week-long streams. Single consumer; samples must arrive in stream order.
class RmssdStream {
public:
    struct PushResult {
        bool accepted = false;
        std::optional<RejectReason> rejection;
        std::optional<HrvReading> reading;
    };

    explicit RmssdStream(WindowConfig window = {}, ValidationRange range = {})
        : window_cfg_(window), range_(range) {}

    PushResult push(const RrSample& raw) {
        if (last_seq_ && raw.seq <= *last_seq_)
            throw ValidationError("seq", "sequence number " + std::to_string(raw.seq) +
                                             " does not increase");
        if (last_t_ && raw.t_ms < *last_t_)
            throw ValidationError("t_ms", "timestamp " + std::to_string(raw.t_ms) + " goes backward");
        last_seq_ = raw.seq;
        last_t_ = raw.t_ms;

        PushResult out;
        auto verdict = validate_rr(raw, range_);
        if (auto* rej = std::get_if<Rejection>(&verdict)) {
            ++rejected_;
            out.rejection = rej->reason;
            return out;
        }
        ++accepted_;
        out.accepted = true;

        if (!window_.empty() && window_.back().seq + 1 == raw.seq) {
            const double d = raw.rr_ms - window_.back().rr_ms;
            sum_sq_ += d * d;
            ++n_diffs_;
        }
        window_.push_back(raw);
        sum_rr_ += raw.rr_ms;
        peak_sq_ = std::max(peak_sq_, sum_sq_);

        const TimeMs start = raw.t_ms - window_cfg_.length_ms;
        while (!window_.empty() && window_.front().t_ms <= start) evict_front();
        // Subtracting large squares leaves residue when the window calms down;
        // rebuilding once the sum has shrunk well below its peak removes it.
        if (evictions_since_rebuild_ >= std::max<std::size_t>(32, window_.size()) || sum_sq_ < peak_sq_ / 16)
            rebuild();

        const std::size_t n = window_.size();
        if (n >= window_cfg_.min_beats && n_diffs_ > 0) {
            HrvReading r;
            r.window_end_ms = raw.t_ms;
            r.rmssd_ms = std::sqrt(std::max(0.0, sum_sq_) / static_cast<double>(n_diffs_));
            r.n_beats = n;
            r.n_diffs = n_diffs_;
            r.mean_hr_bpm = 60'000.0 / (sum_rr_ / static_cast<double>(n));
            out.reading = r;
        }
        return out;
    }

    std::size_t accepted_count() const noexcept { return accepted_; }
    std::size_t rejected_count() const noexcept { return rejected_; }
    const WindowConfig& window_config() const noexcept { return window_cfg_; }

private:
    void evict_front() {
        const RrSample gone = window_.front();
        window_.pop_front();
        sum_rr_ -= gone.rr_ms;
        if (!window_.empty() && gone.seq + 1 == window_.front().seq) {
            const double d = window_.front().rr_ms - gone.rr_ms;
            sum_sq_ -= d * d;
            --n_diffs_;
        }
        ++evictions_since_rebuild_;
    }

    void rebuild() {
        sum_rr_ = 0.0;
        sum_sq_ = 0.0;
        n_diffs_ = 0;
        for (std::size_t i = 0; i < window_.size(); ++i) {
            sum_rr_ += window_[i].rr_ms;
            if (i > 0 && window_[i - 1].seq + 1 == window_[i].seq) {
                const double d = window_[i].rr_ms - window_[i - 1].rr_ms;
                sum_sq_ += d * d;
                ++n_diffs_;
            }
        }
        evictions_since_rebuild_ = 0;
        peak_sq_ = sum_sq_;
    }

    WindowConfig window_cfg_;
    ValidationRange range_;
    std::deque<RrSample> window_;
    double sum_rr_ = 0.0;
    double sum_sq_ = 0.0;
    double peak_sq_ = 0.0;
    std::size_t n_diffs_ = 0;
    std::size_t evictions_since_rebuild_ = 0;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;
    std::optional<std::uint64_t> last_seq_;
    std::optional<TimeMs> last_t_;
};

}  // namespace heartbeatcam
