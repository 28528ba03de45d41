#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include "heartbeatcam/frame.hpp"
#include "heartbeatcam/link.hpp"
#include "heartbeatcam/payload.hpp"
#include "heartbeatcam/scheduler.hpp"

namespace heartbeatcam {

/// Frames answering one capture command: CAPTURE_META, the image chunks, the
/// audio chunks, then CAPTURE_END. Chunk indices run 0..n-1 across both blobs
/// (image first); each blob is sliced into 240-byte pieces independently.
inline std::vector<Frame> glasses_response(std::uint32_t capture_id, const CaptureCmdMsg& cmd) {
    const SyntheticPayload payload = synthesize(capture_id, cmd.captured_at);

    CaptureMetaMsg meta;
    meta.attempt = cmd.attempt;
    meta.timestamp = cmd.captured_at;
    meta.image_size = static_cast<std::uint32_t>(payload.image.size());
    meta.audio_size = static_cast<std::uint32_t>(payload.audio.size());
    meta.image_chunks = chunk_count(payload.image.size());
    meta.audio_chunks = chunk_count(payload.audio.size());

    std::vector<Frame> frames;
    frames.reserve(2 + meta.image_chunks + meta.audio_chunks);
    frames.push_back(make_frame(FrameKind::capture_meta, capture_id, meta.encode()));

    std::uint32_t index = 0;
    for (const Bytes* blob : {&payload.image, &payload.audio}) {
        for (std::size_t off = 0; off < blob->size(); off += max_frame_payload) {
            const std::size_t n = std::min(max_frame_payload, blob->size() - off);
            Bytes slice(blob->begin() + static_cast<std::ptrdiff_t>(off),
                        blob->begin() + static_cast<std::ptrdiff_t>(off + n));
            frames.push_back(make_frame(FrameKind::chunk, capture_id, std::move(slice), index++));
        }
    }

    CaptureEndMsg end;
    end.attempt = cmd.attempt;
    end.total_chunks = index;
    end.image_crc = crc32(payload.image);
    end.audio_crc = crc32(payload.audio);
    frames.push_back(make_frame(FrameKind::capture_end, capture_id, end.encode()));
    return frames;
}

struct GlassesTiming {
    TimeMs audio_record_ms = 3000;  // response starts once the clip is recorded
    TimeMs tick_ms = 1;
    std::size_t frames_per_tick = 4;
};

/// Simulated glasses: answers capture commands over `uplink` and emits TAP
/// frames. Serves one capture at a time; a new command or a NACK for the
/// current one abandons whatever is still queued. If the link drops while
/// frames are queued the rest is never sent.
class GlassesSim {
public:
    GlassesSim(Scheduler& scheduler, SimLink& uplink, GlassesTiming timing = {})
        : scheduler_(scheduler), uplink_(uplink), timing_(timing) {}

    void on_frame(const Frame& f) {
        if (!f.crc_ok()) return;
        if (f.kind == FrameKind::capture_cmd && f.capture_id) {
            if (!uplink_.connected()) return;
            const auto cmd = CaptureCmdMsg::decode(f.payload);
            auto job = std::make_shared<Job>();
            job->capture_id = *f.capture_id;
            job->attempt = cmd.attempt;
            job->frames = glasses_response(*f.capture_id, cmd);
            current_ = job;
            ++commands_served_;
            scheduler_.schedule_in(timing_.audio_record_ms, [this, job] { pump(job); }, "glasses_pump");
        } else if (f.kind == FrameKind::nack && f.capture_id && current_ &&
                   current_->capture_id == *f.capture_id) {
            const auto nack = NackMsg::decode(f.payload);
            if (nack.attempt == current_->attempt) current_.reset();
        }
    }

    void double_tap() {
        TapMsg tap{scheduler_.now(), TapKind::double_tap};
        uplink_.send(make_frame(FrameKind::tap, std::nullopt, tap.encode()));
    }

    std::size_t commands_served() const noexcept { return commands_served_; }
    bool busy() const noexcept { return current_ != nullptr; }

private:
    struct Job {
        std::uint32_t capture_id = 0;
        std::uint8_t attempt = 0;
        std::vector<Frame> frames;
        std::size_t next = 0;
    };

    void pump(const std::shared_ptr<Job>& job) {
        if (current_ != job) return;
        if (!uplink_.connected()) {
            current_.reset();
            return;
        }
        for (std::size_t i = 0; i < timing_.frames_per_tick && job->next < job->frames.size(); ++i)
            uplink_.send(std::move(job->frames[job->next++]));
        if (job->next < job->frames.size())
            scheduler_.schedule_in(timing_.tick_ms, [this, job] { pump(job); }, "glasses_pump");
        else
            current_.reset();
    }

    Scheduler& scheduler_;
    SimLink& uplink_;
    GlassesTiming timing_;
    std::shared_ptr<Job> current_;
    std::size_t commands_served_ = 0;
};

}  // namespace heartbeatcam
