#pragma once

// BLE-shaped framing between the simulated devices and the engine.
//
// Wire layout (little endian):
//   u8 kind | u8 flags | u16 payload_len | u32 seq | u32 capture_id | u32 index
//   | payload (<= 240 bytes) | u32 crc32(payload)
// flags bit 0 marks capture_id as present.

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string_view>

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hash.hpp"
#include "heartbeatcam/hrv.hpp"
#include "heartbeatcam/trigger.hpp"

namespace heartbeatcam {

inline constexpr std::size_t max_frame_payload = 240;
inline constexpr std::size_t frame_header_size = 16;
inline constexpr std::size_t frame_trailer_size = 4;

enum class FrameKind : std::uint8_t {
    rr_sample = 1,
    tap = 2,
    capture_cmd = 3,
    capture_meta = 4,
    chunk = 5,
    capture_end = 6,
    nack = 7,
};

constexpr std::string_view to_string(FrameKind k) noexcept {
    switch (k) {
        case FrameKind::rr_sample: return "RR_SAMPLE";
        case FrameKind::tap: return "TAP";
        case FrameKind::capture_cmd: return "CAPTURE_CMD";
        case FrameKind::capture_meta: return "CAPTURE_META";
        case FrameKind::chunk: return "CHUNK";
        case FrameKind::capture_end: return "CAPTURE_END";
        case FrameKind::nack: return "NACK";
    }
    return "UNKNOWN";
}

struct Frame {
    FrameKind kind = FrameKind::rr_sample;
    std::uint32_t seq = 0;
    std::optional<std::uint32_t> capture_id;
    std::uint32_t index = 0;  // chunk index for CHUNK frames, 0 otherwise
    Bytes payload;
    std::uint32_t crc = 0;

    bool crc_ok() const noexcept { return crc32(payload) == crc; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

inline Frame make_frame(FrameKind kind, std::optional<std::uint32_t> capture_id, Bytes payload,
                        std::uint32_t index = 0) {
    if (payload.size() > max_frame_payload)
        throw ValidationError("payload", "frame payload of " + std::to_string(payload.size()) +
                                             " bytes exceeds " + std::to_string(max_frame_payload));
    Frame f;
    f.kind = kind;
    f.capture_id = capture_id;
    f.index = index;
    f.crc = crc32(payload);
    f.payload = std::move(payload);
    return f;
}

namespace wire {

class Writer {
public:
    template <class T>
    Writer& put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint64_t bits = 0;
        if constexpr (std::is_floating_point_v<T>) {
            static_assert(sizeof(T) == 8);
            bits = std::bit_cast<std::uint64_t>(v);
        } else {
            bits = static_cast<std::uint64_t>(v);
        }
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        return *this;
    }
    Writer& bytes(ByteView b) {
        out_.insert(out_.end(), b.begin(), b.end());
        return *this;
    }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(ByteView in) : in_(in) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > in_.size()) throw ParseError(0, "payload", "truncated frame field");
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        if constexpr (std::is_floating_point_v<T>)
            return std::bit_cast<T>(bits);
        else
            return static_cast<T>(bits);
    }
    ByteView bytes(std::size_t n) {
        if (pos_ + n > in_.size()) throw ParseError(0, "payload", "truncated frame bytes");
        auto v = in_.subspan(pos_, n);
        pos_ += n;
        return v;
    }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace wire

inline Bytes encode(const Frame& f) {
    if (f.payload.size() > max_frame_payload)
        throw ValidationError("payload", "frame payload too large");
    wire::Writer w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(f.kind))
        .put<std::uint8_t>(f.capture_id ? 1 : 0)
        .put<std::uint16_t>(static_cast<std::uint16_t>(f.payload.size()))
        .put<std::uint32_t>(f.seq)
        .put<std::uint32_t>(f.capture_id.value_or(0))
        .put<std::uint32_t>(f.index)
        .bytes(f.payload)
        .put<std::uint32_t>(f.crc);
    return w.take();
}

/// Decodes one frame. Structural problems throw ParseError; a CRC mismatch is
/// not a decode error (check crc_ok()).
inline Frame decode(ByteView bytes) {
    wire::Reader r(bytes);
    Frame f;
    const auto kind = r.get<std::uint8_t>();
    if (kind < 1 || kind > 7) throw ParseError(0, "kind", "unknown frame kind " + std::to_string(kind));
    f.kind = static_cast<FrameKind>(kind);
    const auto flags = r.get<std::uint8_t>();
    const auto len = r.get<std::uint16_t>();
    if (len > max_frame_payload) throw ParseError(0, "payload_len", "payload length over limit");
    f.seq = r.get<std::uint32_t>();
    const auto id = r.get<std::uint32_t>();
    if (flags & 1u) f.capture_id = id;
    f.index = r.get<std::uint32_t>();
    auto body = r.bytes(len);
    f.payload.assign(body.begin(), body.end());
    f.crc = r.get<std::uint32_t>();
    if (r.remaining() != 0) throw ParseError(0, "frame", "trailing bytes after frame");
    return f;
}

// Typed payloads carried by the control frames.

struct RrSampleMsg {
    RrSample sample;

    Bytes encode() const {
        return wire::Writer{}.put(sample.t_ms).put(sample.rr_ms).put(sample.seq).take();
    }
    static RrSampleMsg decode(ByteView b) {
        wire::Reader r(b);
        RrSampleMsg m;
        m.sample.t_ms = r.get<std::int64_t>();
        m.sample.rr_ms = r.get<double>();
        m.sample.seq = r.get<std::uint64_t>();
        return m;
    }
};

struct TapMsg {
    TimeMs t_ms = 0;
    TapKind kind = TapKind::double_tap;

    Bytes encode() const {
        return wire::Writer{}.put(t_ms).put(static_cast<std::uint8_t>(kind)).take();
    }
    static TapMsg decode(ByteView b) {
        wire::Reader r(b);
        TapMsg m;
        m.t_ms = r.get<std::int64_t>();
        m.kind = static_cast<TapKind>(r.get<std::uint8_t>());
        return m;
    }
};

struct CaptureCmdMsg {
    std::uint8_t attempt = 1;
    TimeMs captured_at = 0;

    Bytes encode() const { return wire::Writer{}.put(attempt).put(captured_at).take(); }
    static CaptureCmdMsg decode(ByteView b) {
        wire::Reader r(b);
        CaptureCmdMsg m;
        m.attempt = r.get<std::uint8_t>();
        m.captured_at = r.get<std::int64_t>();
        return m;
    }
};

struct CaptureMetaMsg {
    std::uint8_t attempt = 1;
    TimeMs timestamp = 0;
    std::uint32_t image_size = 0;
    std::uint32_t audio_size = 0;
    std::uint32_t image_chunks = 0;
    std::uint32_t audio_chunks = 0;

    Bytes encode() const {
        return wire::Writer{}
            .put(attempt)
            .put(timestamp)
            .put(image_size)
            .put(audio_size)
            .put(image_chunks)
            .put(audio_chunks)
            .take();
    }
    static CaptureMetaMsg decode(ByteView b) {
        wire::Reader r(b);
        CaptureMetaMsg m;
        m.attempt = r.get<std::uint8_t>();
        m.timestamp = r.get<std::int64_t>();
        m.image_size = r.get<std::uint32_t>();
        m.audio_size = r.get<std::uint32_t>();
        m.image_chunks = r.get<std::uint32_t>();
        m.audio_chunks = r.get<std::uint32_t>();
        return m;
    }
};

struct CaptureEndMsg {
    std::uint8_t attempt = 1;
    std::uint32_t total_chunks = 0;
    std::uint32_t image_crc = 0;
    std::uint32_t audio_crc = 0;

    Bytes encode() const {
        return wire::Writer{}.put(attempt).put(total_chunks).put(image_crc).put(audio_crc).take();
    }
    static CaptureEndMsg decode(ByteView b) {
        wire::Reader r(b);
        CaptureEndMsg m;
        m.attempt = r.get<std::uint8_t>();
        m.total_chunks = r.get<std::uint32_t>();
        m.image_crc = r.get<std::uint32_t>();
        m.audio_crc = r.get<std::uint32_t>();
        return m;
    }
};

enum class NackReason : std::uint8_t { checksum_mismatch = 1, abort = 2 };

struct NackMsg {
    std::uint8_t attempt = 1;
    NackReason reason = NackReason::abort;

    Bytes encode() const {
        return wire::Writer{}.put(attempt).put(static_cast<std::uint8_t>(reason)).take();
    }
    static NackMsg decode(ByteView b) {
        wire::Reader r(b);
        NackMsg m;
        m.attempt = r.get<std::uint8_t>();
        m.reason = static_cast<NackReason>(r.get<std::uint8_t>());
        return m;
    }
};

inline std::uint32_t chunk_count(std::size_t bytes) noexcept {
    return static_cast<std::uint32_t>((bytes + max_frame_payload - 1) / max_frame_payload);
}

}  // namespace heartbeatcam
