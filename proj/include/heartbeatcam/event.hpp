#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hrv.hpp"
#include "heartbeatcam/trigger.hpp"

namespace heartbeatcam {

using json = nlohmann::json;

enum class CaptureStatus { complete, failed };
enum class FailureReason { disconnected, timeout, checksum_mismatch };

constexpr std::string_view to_string(CaptureStatus s) noexcept {
    return s == CaptureStatus::complete ? "complete" : "failed";
}

constexpr std::string_view to_string(FailureReason r) noexcept {
    switch (r) {
        case FailureReason::disconnected: return "disconnected";
        case FailureReason::timeout: return "timeout";
        case FailureReason::checksum_mismatch: return "checksum_mismatch";
    }
    return "unknown";
}

inline std::optional<CaptureStatus> parse_capture_status(std::string_view s) {
    if (s == "complete") return CaptureStatus::complete;
    if (s == "failed") return CaptureStatus::failed;
    return std::nullopt;
}

inline std::optional<FailureReason> parse_failure_reason(std::string_view s) {
    if (s == "disconnected") return FailureReason::disconnected;
    if (s == "timeout") return FailureReason::timeout;
    if (s == "checksum_mismatch") return FailureReason::checksum_mismatch;
    return std::nullopt;
}

struct BaselineSnapshot {
    double mean = 0.0;
    double sd = 0.0;
    double k = default_threshold_k;

    friend bool operator==(const BaselineSnapshot&, const BaselineSnapshot&) = default;
};

enum class AnnotationKind { free_text, template_response };

struct Annotation {
    TimeMs created_at = 0;
    AnnotationKind kind = AnnotationKind::free_text;
    std::string text;
    std::optional<std::string> template_id;
    std::vector<std::pair<std::string, std::string>> responses;  // field_id -> value, in answer order

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct CaptureEvent {
    CaptureId id = 0;
    TimeMs captured_at = 0;
    double hr_bpm = 0.0;
    double rmssd_ms = 0.0;
    BaselineSnapshot baseline;
    CaptureStatus status = CaptureStatus::complete;
    std::optional<FailureReason> failure_reason;
    unsigned attempts = 1;
    std::optional<std::string> image_ref;
    std::optional<std::string> audio_ref;
    TimeMs reveal_at = 0;
    std::vector<Annotation> annotations;
    bool withdrawn = false;

    friend bool operator==(const CaptureEvent&, const CaptureEvent&) = default;
};

enum class InputKind { text, scale_1_to_5, choice };

constexpr std::string_view to_string(InputKind k) noexcept {
    switch (k) {
        case InputKind::text: return "text";
        case InputKind::scale_1_to_5: return "scale_1_to_5";
        case InputKind::choice: return "choice";
    }
    return "unknown";
}

struct TemplateField {
    std::string field_id;
    std::string prompt;
    InputKind input = InputKind::text;
    std::vector<std::string> options;
    bool required = false;

    friend bool operator==(const TemplateField&, const TemplateField&) = default;
};

/// Structured self-report form. The library ships the machinery only; form
/// content is supplied by whoever deploys it.
struct AnnotationTemplate {
    std::string template_id;
    std::string title;
    std::vector<TemplateField> fields;

    void validate() const {
        if (template_id.empty()) throw ValidationError("template_id", "template_id must not be empty");
        std::set<std::string> seen;
        for (const auto& f : fields) {
            if (f.field_id.empty()) throw ValidationError("field_id", "field_id must not be empty");
            if (!seen.insert(f.field_id).second)
                throw ValidationError(f.field_id, "duplicate field_id '" + f.field_id + "'");
            if (f.input == InputKind::choice && f.options.empty())
                throw ValidationError(f.field_id, "choice field '" + f.field_id + "' needs options");
        }
    }

    /// Throws ValidationError naming the offending field.
    void check(const Annotation& a) const {
        std::set<std::string> answered;
        for (const auto& [field_id, value] : a.responses) {
            auto it = std::find_if(fields.begin(), fields.end(),
                                   [&](const TemplateField& f) { return f.field_id == field_id; });
            if (it == fields.end())
                throw ValidationError(field_id, "field '" + field_id + "' is not part of template '" +
                                                    template_id + "'");
            if (!answered.insert(field_id).second)
                throw ValidationError(field_id, "field '" + field_id + "' answered twice");
            if (value.empty()) continue;
            if (it->input == InputKind::scale_1_to_5 &&
                !(value.size() == 1 && value[0] >= '1' && value[0] <= '5'))
                throw ValidationError(field_id, "field '" + field_id + "' expects a value from 1 to 5");
            if (it->input == InputKind::choice &&
                std::find(it->options.begin(), it->options.end(), value) == it->options.end())
                throw ValidationError(field_id, "field '" + field_id + "' expects one of its options");
        }
        for (const auto& f : fields) {
            if (!f.required) continue;
            auto it = std::find_if(a.responses.begin(), a.responses.end(),
                                   [&](const auto& r) { return r.first == f.field_id; });
            if (it == a.responses.end() || it->second.empty())
                throw ValidationError(f.field_id, "required field '" + f.field_id + "' is missing");
        }
    }

    friend bool operator==(const AnnotationTemplate&, const AnnotationTemplate&) = default;
};

// JSON forms shared by the record log, the HTTP API and exports.

inline json to_json(const Annotation& a) {
    json j{{"created_at", a.created_at},
           {"kind", a.kind == AnnotationKind::free_text ? "free_text" : "template"},
           {"text", a.text}};
    if (a.template_id) {
        j["template_id"] = *a.template_id;
        json rs = json::array();
        for (const auto& [k, v] : a.responses) rs.push_back({{"field_id", k}, {"value", v}});
        j["responses"] = rs;
    }
    return j;
}

namespace detail {

inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(0, key, std::string("missing field '") + key + "'");
    return j.at(key);
}

inline std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw ParseError(0, key, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Parses an annotation body. `created_at` is optional here because the
/// store stamps it.
inline Annotation annotation_from_json(const json& j) {
    if (!j.is_object()) throw ParseError(0, "", "annotation must be a JSON object");
    Annotation a;
    const std::string kind = j.contains("kind") ? detail::string_field(j, "kind") : "free_text";
    if (kind == "free_text") {
        a.kind = AnnotationKind::free_text;
    } else if (kind == "template") {
        a.kind = AnnotationKind::template_response;
    } else {
        throw ParseError(0, "kind", "unknown annotation kind '" + kind + "'");
    }
    if (j.contains("text")) a.text = detail::string_field(j, "text");
    if (j.contains("created_at") && j.at("created_at").is_number_integer())
        a.created_at = j.at("created_at").get<TimeMs>();
    if (j.contains("template_id") && !j.at("template_id").is_null())
        a.template_id = detail::string_field(j, "template_id");
    if (j.contains("responses")) {
        const auto& rs = j.at("responses");
        if (rs.is_array()) {
            for (const auto& r : rs)
                a.responses.emplace_back(detail::string_field(r, "field_id"), detail::string_field(r, "value"));
        } else if (rs.is_object()) {
            for (const auto& [k, v] : rs.items()) {
                if (!v.is_string() && !v.is_number_integer())
                    throw ParseError(0, k, "response '" + k + "' must be a string or integer");
                a.responses.emplace_back(k, v.is_string() ? v.get<std::string>() : std::to_string(v.get<long long>()));
            }
        } else {
            throw ParseError(0, "responses", "responses must be an array or object");
        }
    }
    return a;
}

inline json to_json(const AnnotationTemplate& t) {
    json fields = json::array();
    for (const auto& f : t.fields) {
        json fj{{"field_id", f.field_id}, {"prompt", f.prompt}, {"input", to_string(f.input)}, {"required", f.required}};
        if (f.input == InputKind::choice) fj["options"] = f.options;
        fields.push_back(fj);
    }
    return {{"template_id", t.template_id}, {"title", t.title}, {"fields", fields}};
}

inline AnnotationTemplate template_from_json(const json& j) {
    AnnotationTemplate t;
    t.template_id = detail::string_field(j, "template_id");
    t.title = j.contains("title") ? detail::string_field(j, "title") : std::string{};
    const auto& fields = detail::field(j, "fields");
    if (!fields.is_array()) throw ParseError(0, "fields", "fields must be an array");
    for (const auto& fj : fields) {
        TemplateField f;
        f.field_id = detail::string_field(fj, "field_id");
        f.prompt = fj.contains("prompt") ? detail::string_field(fj, "prompt") : std::string{};
        const std::string input = detail::string_field(fj, "input");
        if (input == "text") {
            f.input = InputKind::text;
        } else if (input == "scale_1_to_5") {
            f.input = InputKind::scale_1_to_5;
        } else if (input == "choice") {
            f.input = InputKind::choice;
            const auto& opts = detail::field(fj, "options");
            if (!opts.is_array()) throw ParseError(0, "options", "options must be an array");
            for (const auto& o : opts) {
                if (!o.is_string()) throw ParseError(0, "options", "options must be strings");
                f.options.push_back(o.get<std::string>());
            }
        } else {
            throw ParseError(0, "input", "unknown input kind '" + input + "'");
        }
        f.required = fj.contains("required") && fj.at("required").is_boolean() && fj.at("required").get<bool>();
        t.fields.push_back(std::move(f));
    }
    t.validate();
    return t;
}

inline json to_json(const BaselineSnapshot& b) { return {{"mean", b.mean}, {"sd", b.sd}, {"k", b.k}}; }

inline json to_json(const Baseline& b) {
    return {{"mean", b.mean},
            {"sd", b.sd},
            {"k", b.k},
            {"n_samples", b.n_samples},
            {"threshold", b.threshold()},
            {"period_start", b.period_start},
            {"period_end", b.period_end}};
}

/// Full record form, as written to the log.
inline json to_json(const CaptureEvent& e) {
    json anns = json::array();
    for (const auto& a : e.annotations) anns.push_back(to_json(a));
    json j{{"id", e.id},
           {"captured_at", e.captured_at},
           {"hr_bpm", e.hr_bpm},
           {"rmssd_ms", e.rmssd_ms},
           {"baseline", to_json(e.baseline)},
           {"status", to_string(e.status)},
           {"failure_reason", e.failure_reason ? json(to_string(*e.failure_reason)) : json(nullptr)},
           {"attempts", e.attempts},
           {"image_ref", e.image_ref ? json(*e.image_ref) : json(nullptr)},
           {"audio_ref", e.audio_ref ? json(*e.audio_ref) : json(nullptr)},
           {"reveal_at", e.reveal_at},
           {"annotations", anns}};
    return j;
}

inline CaptureEvent capture_event_from_json(const json& j) {
    CaptureEvent e;
    e.id = detail::field(j, "id").get<CaptureId>();
    e.captured_at = detail::field(j, "captured_at").get<TimeMs>();
    e.hr_bpm = detail::field(j, "hr_bpm").get<double>();
    e.rmssd_ms = detail::field(j, "rmssd_ms").get<double>();
    const auto& b = detail::field(j, "baseline");
    e.baseline = {detail::field(b, "mean").get<double>(), detail::field(b, "sd").get<double>(),
                  detail::field(b, "k").get<double>()};
    auto status = parse_capture_status(detail::string_field(j, "status"));
    if (!status) throw ParseError(0, "status", "unknown capture status");
    e.status = *status;
    if (j.contains("failure_reason") && j.at("failure_reason").is_string()) {
        e.failure_reason = parse_failure_reason(j.at("failure_reason").get<std::string>());
        if (!e.failure_reason) throw ParseError(0, "failure_reason", "unknown failure reason");
    }
    if (j.contains("attempts")) e.attempts = j.at("attempts").get<unsigned>();
    if (j.contains("image_ref") && j.at("image_ref").is_string()) e.image_ref = j.at("image_ref").get<std::string>();
    if (j.contains("audio_ref") && j.at("audio_ref").is_string()) e.audio_ref = j.at("audio_ref").get<std::string>();
    e.reveal_at = detail::field(j, "reveal_at").get<TimeMs>();
    if (j.contains("annotations"))
        for (const auto& a : j.at("annotations")) e.annotations.push_back(annotation_from_json(a));
    return e;
}

}  // namespace heartbeatcam
