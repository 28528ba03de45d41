#pragma once

// Capture event store.
//
// Layout under the store directory:
//   log.jsonl     append-only record log, one JSON document per line, "v": 1
//   blobs/        content-addressed payloads, <sha256>.pgm / <sha256>.wav
//
// In-memory state is rebuilt by replaying log.jsonl on open. One writer,
// any number of readers; readers always see a whole-record prefix.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/event.hpp"
#include "heartbeatcam/hash.hpp"
#include "heartbeatcam/payload.hpp"
#include "heartbeatcam/zip.hpp"

namespace heartbeatcam {

inline constexpr int store_schema_version = 1;
inline constexpr TimeMs default_reveal_delay_ms = 86'400'000;
inline constexpr TimeMs pause_context_window_ms = 60'000;

struct StoreOptions {
    TimeMs reveal_delay_ms = default_reveal_delay_ms;
};

enum class ViewRole { client, export_ };
enum class BlobKind { image, audio };

/// What a reader is allowed to see of one event at a given time. Before
/// reveal_at the blob refs are stripped.
struct EventView {
    CaptureEvent event;
    bool revealed = false;
    bool pause_context = false;
};

inline json to_json(const EventView& v) {
    json anns = json::array();
    for (const auto& a : v.event.annotations) anns.push_back(to_json(a));
    const auto& e = v.event;
    return {{"id", e.id},
            {"captured_at", e.captured_at},
            {"hr_bpm", e.hr_bpm},
            {"rmssd_ms", e.rmssd_ms},
            {"baseline", to_json(e.baseline)},
            {"status", to_string(e.status)},
            {"failure_reason", e.failure_reason ? json(to_string(*e.failure_reason)) : json(nullptr)},
            {"attempts", e.attempts},
            {"reveal_at", e.reveal_at},
            {"revealed", v.revealed},
            {"pause_context", v.pause_context},
            {"withdrawn", e.withdrawn},
            {"annotations", anns},
            {"image", e.image_ref ? json(*e.image_ref) : json(nullptr)},
            {"audio", e.audio_ref ? json(*e.audio_ref) : json(nullptr)}};
}

struct EventFilter {
    std::optional<TimeMs> from;  // inclusive
    std::optional<TimeMs> to;    // exclusive
    std::optional<CaptureStatus> status;
};

struct ExportFilter {
    std::optional<TimeMs> from;  // inclusive
    std::optional<TimeMs> to;    // exclusive
    bool include_unrevealed = false;
    bool include_failed = true;
};

struct ExportResult {
    std::filesystem::path archive_path;
    std::size_t event_count = 0;
};

struct PauseRecord {
    TimeMs t = 0;
    bool paused = false;

    friend bool operator==(const PauseRecord&, const PauseRecord&) = default;
};

/// Number formatting shared by the CSV summary and the JSON manifest.
inline std::string format_number(double v) { return json(v).dump(); }

class Store {
public:
    explicit Store(std::filesystem::path dir, StoreOptions options = {})
        : dir_(std::move(dir)), options_(options) {
        if (options_.reveal_delay_ms < 0) throw ValidationError("reveal_delay", "reveal delay must be non-negative");
        std::error_code ec;
        std::filesystem::create_directories(dir_ / "blobs", ec);
        if (ec) throw Error("cannot create store at " + dir_.string() + ": " + ec.message());
        replay();
        log_.open(log_path(), std::ios::app | std::ios::binary);
        if (!log_) throw Error("cannot open " + log_path().string() + " for append");
    }

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path log_path() const { return dir_ / "log.jsonl"; }
    TimeMs reveal_delay() const noexcept { return options_.reveal_delay_ms; }

    /// Persists a capture event. Complete events must come with their payload;
    /// failed events must not. reveal_at is set from the configured delay.
    CaptureId append_event(CaptureEvent ev, const SyntheticPayload* payload = nullptr) {
        std::unique_lock lock(mutex_);
        if (index_.count(ev.id)) throw Conflict("event " + std::to_string(ev.id) + " already exists");
        if (ev.status == CaptureStatus::failed) {
            if (payload) throw ValidationError("status", "failed events carry no payload");
            if (!ev.failure_reason) throw ValidationError("failure_reason", "failed events need a reason");
            ev.image_ref.reset();
            ev.audio_ref.reset();
        } else {
            if (!payload) throw ValidationError("payload", "complete events need image and audio payloads");
            ev.failure_reason.reset();
            ev.image_ref = write_blob(payload->image, ".pgm");
            ev.audio_ref = write_blob(payload->audio, ".wav");
        }
        ev.reveal_at = ev.captured_at + options_.reveal_delay_ms;
        ev.annotations.clear();
        ev.withdrawn = false;
        write_record({{"v", store_schema_version}, {"type", "capture"}, {"event", to_json(ev)}});
        apply_capture(std::move(ev));
        return events_.back().id;
    }

    EventView view_event(CaptureId id, TimeMs now, ViewRole role = ViewRole::client) const {
        std::shared_lock lock(mutex_);
        const CaptureEvent& e = find(id);
        if (role == ViewRole::export_ && e.withdrawn)
            throw NotFound("event " + std::to_string(id) + " is withdrawn from export");
        return make_view(e, now);
    }

    std::vector<EventView> list_events(TimeMs now, const EventFilter& filter = {}) const {
        std::shared_lock lock(mutex_);
        std::vector<EventView> out;
        for (const auto& e : sorted_events()) {
            if (filter.from && e->captured_at < *filter.from) continue;
            if (filter.to && e->captured_at >= *filter.to) continue;
            if (filter.status && e->status != *filter.status) continue;
            out.push_back(make_view(*e, now));
        }
        return out;
    }

    /// Appends an annotation stamped with `now`. Allowed before reveal.
    EventView annotate(CaptureId id, Annotation a, TimeMs now) {
        std::unique_lock lock(mutex_);
        find(id);
        a.created_at = now;
        if (a.kind == AnnotationKind::template_response) {
            if (!a.template_id) throw ValidationError("template_id", "template annotations need a template_id");
            auto it = templates_.find(*a.template_id);
            if (it == templates_.end()) throw NotFound("unknown template '" + *a.template_id + "'");
            it->second.check(a);
        } else {
            if (a.text.empty()) throw ValidationError("text", "free-text annotations need text");
            a.template_id.reset();
            a.responses.clear();
        }
        write_record({{"v", store_schema_version}, {"type", "annotation"}, {"event_id", id}, {"annotation", to_json(a)}});
        apply_annotation(id, std::move(a));
        return make_view(find(id), now);
    }

    void add_template(AnnotationTemplate t) {
        std::unique_lock lock(mutex_);
        t.validate();
        if (templates_.count(t.template_id)) throw Conflict("template '" + t.template_id + "' already exists");
        write_record({{"v", store_schema_version}, {"type", "template"}, {"template", to_json(t)}});
        template_order_.push_back(t.template_id);
        templates_.emplace(t.template_id, std::move(t));
    }

    std::vector<AnnotationTemplate> templates() const {
        std::shared_lock lock(mutex_);
        std::vector<AnnotationTemplate> out;
        for (const auto& id : template_order_) out.push_back(templates_.at(id));
        return out;
    }

    void record_pause(TimeMs t, bool paused) {
        std::unique_lock lock(mutex_);
        write_record({{"v", store_schema_version}, {"type", "pause"}, {"t", t}, {"paused", paused}});
        pauses_.push_back({t, paused});
    }

    /// Tombstone: the event stays in the log but leaves every future export.
    void withdraw(CaptureId id, TimeMs now) {
        std::unique_lock lock(mutex_);
        if (find(id).withdrawn) return;
        write_record({{"v", store_schema_version}, {"type", "withdraw"}, {"event_id", id}, {"t", now}});
        mutable_find(id).withdrawn = true;
    }

    /// Records the latest virtual time a writer reached; used as the default
    /// "now" by offline readers.
    void record_clock(TimeMs t) {
        std::unique_lock lock(mutex_);
        write_record({{"v", store_schema_version}, {"type", "clock"}, {"t", t}});
        clock_ = std::max(clock_.value_or(t), t);
    }

    std::optional<TimeMs> last_clock() const {
        std::shared_lock lock(mutex_);
        return clock_;
    }

    /// Blob bytes, or nullopt while unrevealed or when the event has none.
    std::optional<Bytes> read_blob(CaptureId id, BlobKind kind, TimeMs now) const {
        std::shared_lock lock(mutex_);
        const CaptureEvent& e = find(id);
        if (now < e.reveal_at) return std::nullopt;
        const auto& ref = kind == BlobKind::image ? e.image_ref : e.audio_ref;
        if (!ref) return std::nullopt;
        return load_file(dir_ / *ref);
    }

    std::size_t event_count() const {
        std::shared_lock lock(mutex_);
        return events_.size();
    }

    std::vector<CaptureEvent> events() const {
        std::shared_lock lock(mutex_);
        return events_;
    }

    std::vector<PauseRecord> pauses() const {
        std::shared_lock lock(mutex_);
        return pauses_;
    }

    /// Builds the export archive in memory: manifest.json, summary.csv and
    /// blobs/ for revealed complete events. Output depends only on the log
    /// contents, the filter and `now`.
    Bytes export_archive(const ExportFilter& filter, TimeMs now, std::size_t* count = nullptr) const {
        std::shared_lock lock(mutex_);
        json manifest = json::array();
        std::string summary = "captured_at,hr_bpm,rmssd_ms,status,annotation_count\n";
        std::vector<std::string> blob_refs;

        for (const CaptureEvent* e : sorted_events()) {
            if (e->withdrawn) continue;
            if (filter.from && e->captured_at < *filter.from) continue;
            if (filter.to && e->captured_at >= *filter.to) continue;
            const EventView view = make_view(*e, now);
            // Failed events have no media to gate, so include_failed alone decides.
            if (e->status == CaptureStatus::failed) {
                if (!filter.include_failed) continue;
            } else if (!view.revealed && !filter.include_unrevealed) {
                continue;
            }
            json rec = to_json(view);
            rec.erase("withdrawn");
            manifest.push_back(rec);
            summary += std::to_string(e->captured_at) + "," + format_number(e->hr_bpm) + "," +
                       format_number(e->rmssd_ms) + "," + std::string(to_string(e->status)) + "," +
                       std::to_string(e->annotations.size()) + "\n";
            for (const auto* ref : {&view.event.image_ref, &view.event.audio_ref})
                if (*ref) blob_refs.push_back(**ref);
        }
        std::sort(blob_refs.begin(), blob_refs.end());
        blob_refs.erase(std::unique(blob_refs.begin(), blob_refs.end()), blob_refs.end());

        ZipWriter zip;
        zip.add("manifest.json", manifest.dump(2) + "\n");
        zip.add("summary.csv", summary);
        for (const auto& ref : blob_refs) zip.add(ref, load_file(dir_ / ref));
        if (count) *count = manifest.size();
        return zip.finish();
    }

    ExportResult export_to(const ExportFilter& filter, TimeMs now, const std::filesystem::path& out) const {
        std::size_t count = 0;
        const Bytes zip = export_archive(filter, now, &count);
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        write_file_atomic(out, zip);
        return {out, count};
    }

    static Bytes load_file(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw Error("cannot read " + p.string());
        return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    static void write_file_atomic(const std::filesystem::path& p, ByteView data) {
        const auto tmp = p.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + tmp);
            out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
            if (!out) throw Error("short write to " + tmp);
        }
        std::filesystem::rename(tmp, p);
    }

    static void write_file_atomic(const std::filesystem::path& p, std::string_view text) {
        write_file_atomic(p, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

private:
    void replay() {
        std::ifstream in(log_path(), std::ios::binary);
        if (!in) return;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                apply_record(json::parse(line));
            } catch (const json::exception& e) {
                throw ParseError(line_no, "log.jsonl", std::string("bad store record: ") + e.what());
            } catch (const ParseError& e) {
                throw ParseError(line_no, e.field(), std::string("bad store record: ") + e.what());
            }
        }
    }

    void apply_record(const json& r) {
        if (!r.contains("v") || r.at("v").get<int>() != store_schema_version)
            throw ParseError(0, "v", "unsupported record version");
        const auto type = r.at("type").get<std::string>();
        if (type == "capture") {
            apply_capture(capture_event_from_json(r.at("event")));
        } else if (type == "annotation") {
            apply_annotation(r.at("event_id").get<CaptureId>(), annotation_from_json(r.at("annotation")));
        } else if (type == "template") {
            auto t = template_from_json(r.at("template"));
            template_order_.push_back(t.template_id);
            templates_.emplace(t.template_id, std::move(t));
        } else if (type == "pause") {
            pauses_.push_back({r.at("t").get<TimeMs>(), r.at("paused").get<bool>()});
        } else if (type == "withdraw") {
            mutable_find(r.at("event_id").get<CaptureId>()).withdrawn = true;
        } else if (type == "clock") {
            const auto t = r.at("t").get<TimeMs>();
            clock_ = std::max(clock_.value_or(t), t);
        } else {
            throw ParseError(0, "type", "unknown record type '" + type + "'");
        }
    }

    void apply_capture(CaptureEvent ev) {
        index_[ev.id] = events_.size();
        events_.push_back(std::move(ev));
    }

    void apply_annotation(CaptureId id, Annotation a) { mutable_find(id).annotations.push_back(std::move(a)); }

    void write_record(const json& record) {
        const std::string line = record.dump() + "\n";
        log_.write(line.data(), static_cast<std::streamsize>(line.size()));
        log_.flush();
        if (!log_) throw Error("failed to append to " + log_path().string());
    }

    std::string write_blob(ByteView data, const char* ext) {
        const std::string ref = "blobs/" + sha256_hex(data) + ext;
        const auto path = dir_ / ref;
        if (!std::filesystem::exists(path)) write_file_atomic(path, data);
        return ref;
    }

    const CaptureEvent& find(CaptureId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw NotFound("no event with id " + std::to_string(id));
        return events_[it->second];
    }

    CaptureEvent& mutable_find(CaptureId id) {
        auto it = index_.find(id);
        if (it == index_.end()) throw NotFound("no event with id " + std::to_string(id));
        return events_[it->second];
    }

    std::vector<const CaptureEvent*> sorted_events() const {
        std::vector<const CaptureEvent*> out;
        out.reserve(events_.size());
        for (const auto& e : events_) out.push_back(&e);
        std::sort(out.begin(), out.end(), [](const CaptureEvent* a, const CaptureEvent* b) {
            return a->captured_at != b->captured_at ? a->captured_at < b->captured_at : a->id < b->id;
        });
        return out;
    }

    EventView make_view(const CaptureEvent& e, TimeMs now) const {
        EventView v;
        v.event = e;
        v.revealed = now >= e.reveal_at;
        if (!v.revealed) {
            v.event.image_ref.reset();
            v.event.audio_ref.reset();
        }
        v.pause_context = std::any_of(pauses_.begin(), pauses_.end(), [&](const PauseRecord& p) {
            return p.t >= e.captured_at - pause_context_window_ms && p.t <= e.captured_at + pause_context_window_ms;
        });
        return v;
    }

    std::filesystem::path dir_;
    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::ofstream log_;
    std::vector<CaptureEvent> events_;
    std::map<CaptureId, std::size_t> index_;
    std::map<std::string, AnnotationTemplate> templates_;
    std::vector<std::string> template_order_;
    std::vector<PauseRecord> pauses_;
    std::optional<TimeMs> clock_;
};

}  // namespace heartbeatcam
