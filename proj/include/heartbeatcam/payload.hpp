#pragma once

// Deterministic stand-ins for what the glasses camera and microphone produce:
// a raw 1280x720 grayscale PGM snapshot and a 3 s, 8 kHz, 16-bit mono WAV clip.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "heartbeatcam/hash.hpp"
#include "heartbeatcam/hrv.hpp"

namespace heartbeatcam {

inline constexpr int image_width = 1280;
inline constexpr int image_height = 720;
inline constexpr int audio_sample_rate = 8000;
inline constexpr int audio_samples = 24'000;

struct SyntheticPayload {
    Bytes image;  // binary PGM (P5)
    Bytes audio;  // RIFF/PCM WAV
};

namespace detail {

inline void put_le(Bytes& out, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_le(const std::uint8_t* p, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

// Bit bands: rows [0,80) carry the capture id in 32 columns of 40 px,
// rows [80,160) carry the 64-bit timestamp in 64 columns of 20 px.
inline constexpr int id_band_rows = 80;
inline constexpr int ts_band_rows = 80;

}  // namespace detail

inline std::string pgm_header() {
    return "P5\n" + std::to_string(image_width) + " " + std::to_string(image_height) + "\n255\n";
}

inline Bytes synthesize_image(std::uint32_t capture_id, TimeMs timestamp) {
    const std::string header = pgm_header();
    Bytes out;
    out.reserve(header.size() + static_cast<std::size_t>(image_width) * image_height);
    out.insert(out.end(), header.begin(), header.end());
    const auto ts = static_cast<std::uint64_t>(timestamp);
    for (int y = 0; y < image_height; ++y) {
        for (int x = 0; x < image_width; ++x) {
            std::uint8_t px;
            if (y < detail::id_band_rows) {
                const int bit = 31 - x / 40;
                px = ((capture_id >> bit) & 1u) ? 255 : 0;
            } else if (y < detail::id_band_rows + detail::ts_band_rows) {
                const int bit = 63 - x / 20;
                px = ((ts >> bit) & 1u) ? 255 : 0;
            } else {
                px = static_cast<std::uint8_t>((x + 2 * y + capture_id * 37u) & 0xFFu);
            }
            out.push_back(px);
        }
    }
    return out;
}

inline double audio_tone_hz(std::uint32_t capture_id) noexcept {
    return 200.0 + static_cast<double>(capture_id % 800u);
}

inline Bytes synthesize_audio(std::uint32_t capture_id) {
    constexpr std::uint32_t data_bytes = audio_samples * 2;
    Bytes out;
    out.reserve(44 + data_bytes);
    auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
    tag("RIFF");
    detail::put_le(out, 36 + data_bytes, 4);
    tag("WAVE");
    tag("fmt ");
    detail::put_le(out, 16, 4);
    detail::put_le(out, 1, 2);  // PCM
    detail::put_le(out, 1, 2);  // mono
    detail::put_le(out, audio_sample_rate, 4);
    detail::put_le(out, audio_sample_rate * 2, 4);
    detail::put_le(out, 2, 2);
    detail::put_le(out, 16, 2);
    tag("data");
    detail::put_le(out, data_bytes, 4);

    const double w = 2.0 * std::numbers::pi * audio_tone_hz(capture_id) / audio_sample_rate;
    for (int n = 0; n < audio_samples; ++n) {
        const auto s = static_cast<std::int16_t>(std::lround(16'000.0 * std::sin(w * n)));
        detail::put_le(out, static_cast<std::uint16_t>(s), 2);
    }
    return out;
}

inline SyntheticPayload synthesize(std::uint32_t capture_id, TimeMs timestamp) {
    return {synthesize_image(capture_id, timestamp), synthesize_audio(capture_id)};
}

struct PgmInfo {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t pixel_offset = 0;
};

/// Parses a binary PGM header; nullopt when the bytes are not a complete P5 image.
inline std::optional<PgmInfo> parse_pgm(ByteView bytes) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> std::optional<int> {
        skip_ws();
        long v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && pos - start < 9)
            v = v * 10 + (bytes[pos++] - '0');
        if (pos == start) return std::nullopt;
        return static_cast<int>(v);
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') return std::nullopt;
    pos = 2;
    PgmInfo info;
    auto w = read_int(), h = read_int(), m = read_int();
    if (!w || !h || !m || pos >= bytes.size() || !std::isspace(bytes[pos])) return std::nullopt;
    info.width = *w;
    info.height = *h;
    info.maxval = *m;
    info.pixel_offset = pos + 1;
    const std::size_t bpp = info.maxval > 255 ? 2 : 1;
    if (bytes.size() != info.pixel_offset + bpp * static_cast<std::size_t>(info.width) * info.height)
        return std::nullopt;
    return info;
}

struct WavInfo {
    int sample_rate = 0;
    int channels = 0;
    int bits_per_sample = 0;
    int format = 0;
    std::size_t n_samples = 0;
    std::size_t data_offset = 0;
};

inline std::optional<WavInfo> parse_wav(ByteView bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        return std::nullopt;
    WavInfo info;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const auto* p = bytes.data() + pos;
        const auto len = static_cast<std::size_t>(detail::get_le(p + 4, 4));
        if (pos + 8 + len > bytes.size()) return std::nullopt;
        if (std::memcmp(p, "fmt ", 4) == 0 && len >= 16) {
            info.format = static_cast<int>(detail::get_le(p + 8, 2));
            info.channels = static_cast<int>(detail::get_le(p + 10, 2));
            info.sample_rate = static_cast<int>(detail::get_le(p + 12, 4));
            info.bits_per_sample = static_cast<int>(detail::get_le(p + 22, 2));
            have_fmt = true;
        } else if (std::memcmp(p, "data", 4) == 0 && have_fmt) {
            const std::size_t frame = static_cast<std::size_t>(info.channels) * info.bits_per_sample / 8;
            if (frame == 0) return std::nullopt;
            info.n_samples = len / frame;
            info.data_offset = pos + 8;
            return info;
        }
        pos += 8 + len + (len & 1);
    }
    return std::nullopt;
}

/// Recovers the (capture_id, timestamp) encoded in a synthesized image's bit bands.
inline std::optional<std::pair<std::uint32_t, TimeMs>> decode_image_tag(ByteView pgm) {
    auto info = parse_pgm(pgm);
    if (!info || info->width != image_width || info->height < detail::id_band_rows + detail::ts_band_rows)
        return std::nullopt;
    const auto* px = pgm.data() + info->pixel_offset;
    const int row_id = detail::id_band_rows / 2;
    const int row_ts = detail::id_band_rows + detail::ts_band_rows / 2;
    std::uint32_t id = 0;
    for (int bit = 0; bit < 32; ++bit)
        id = (id << 1) | (px[row_id * image_width + bit * 40 + 20] > 127 ? 1u : 0u);
    std::uint64_t ts = 0;
    for (int bit = 0; bit < 64; ++bit)
        ts = (ts << 1) | (px[row_ts * image_width + bit * 20 + 10] > 127 ? 1u : 0u);
    return std::pair{id, static_cast<TimeMs>(ts)};
}

}  // namespace heartbeatcam
