#include "study360/study_config.hpp"

#include <algorithm>
#include <set>

namespace study360 {

using nlohmann::json;

ParseError::ParseError(Kind kind, std::string field, const std::string& what)
    : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

namespace {

std::string join(const std::string& path, std::string_view key) {
    if (path.empty()) return std::string(key);
    return path + "." + std::string(key);
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
    const std::string name = join(path, key);
    if (!obj.is_object()) throw ParseError(ParseError::Kind::wrong_type, path, "expected object at " + path);
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(ParseError::Kind::missing_field, name, "missing field " + name);
    return *it;
}

std::int64_t as_int(const json& v, const std::string& name) {
    if (!v.is_number_integer()) throw ParseError(ParseError::Kind::wrong_type, name, name + " must be an integer");
    return v.get<std::int64_t>();
}

double as_real(const json& v, const std::string& name) {
    if (!v.is_number()) throw ParseError(ParseError::Kind::wrong_type, name, name + " must be a number");
    return v.get<double>();
}

std::string as_string(const json& v, const std::string& name) {
    if (!v.is_string()) throw ParseError(ParseError::Kind::wrong_type, name, name + " must be a string");
    return v.get<std::string>();
}

std::int64_t req_int(const json& obj, std::string_view key, const std::string& path) {
    return as_int(require(obj, key, path), join(path, key));
}

std::string req_string(const json& obj, std::string_view key, const std::string& path) {
    return as_string(require(obj, key, path), join(path, key));
}

const json& req_array(const json& obj, std::string_view key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_array()) throw ParseError(ParseError::Kind::wrong_type, join(path, key), join(path, key) + " must be an array");
    return v;
}

MediaRef media_from_json(const json& j, const std::string& path) {
    MediaRef m;
    m.url = req_string(j, "url", path);
    m.duration_ms = req_int(j, "duration_ms", path);
    m.projection = req_string(j, "projection", path);
    m.width_px = req_int(j, "width_px", path);
    m.height_px = req_int(j, "height_px", path);
    return m;
}

AudioTrack audio_from_json(const json& j, const std::string& path) {
    AudioTrack a;
    a.id = req_string(j, "id", path);
    a.url = req_string(j, "url", path);
    a.start_ms = req_int(j, "start_ms", path);
    if (auto it = j.find("gain"); it != j.end()) a.gain = as_real(*it, join(path, "gain"));
    if (auto it = j.find("mode"); it != j.end()) {
        const std::string mode = as_string(*it, join(path, "mode"));
        if (mode == "mono") {
            a.mode.kind = AudioMode::Kind::mono;
        } else if (mode == "spatial") {
            a.mode.kind = AudioMode::Kind::spatial;
            a.mode.anchor = direction_from_json(require(j, "anchor", path), join(path, "anchor"));
        } else {
            throw ParseError(ParseError::Kind::wrong_type, join(path, "mode"), "unknown audio mode '" + mode + "'");
        }
    }
    return a;
}

json audio_to_json(const AudioTrack& a) {
    json j{{"id", a.id}, {"url", a.url}, {"start_ms", a.start_ms}, {"gain", a.gain}};
    if (a.mode.kind == AudioMode::Kind::spatial) {
        j["mode"] = "spatial";
        j["anchor"] = direction_to_json(a.mode.anchor);
    } else {
        j["mode"] = "mono";
    }
    return j;
}

bool yaw_ok(double yaw) { return std::isfinite(yaw) && yaw >= -540.0 && yaw < 540.0; }
bool pitch_ok(double pitch) { return std::isfinite(pitch) && pitch >= -90.0 && pitch <= 90.0; }

void check_direction(const Direction& d, const std::string& subject, std::vector<Violation>& out) {
    if (!yaw_ok(d.yaw_deg)) out.push_back({ViolationKind::yaw_out_of_range, subject});
    if (!pitch_ok(d.pitch_deg)) out.push_back({ViolationKind::pitch_out_of_range, subject});
}

Direction wrapped(Direction d) {
    d.yaw_deg = wrap_yaw_deg(d.yaw_deg);
    return d;
}

}  // namespace

json direction_to_json(const Direction& d) { return json{{"yaw_deg", d.yaw_deg}, {"pitch_deg", d.pitch_deg}}; }

Direction direction_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(ParseError::Kind::wrong_type, path, path + " must be an object");
    return {as_real(require(j, "yaw_deg", path), join(path, "yaw_deg")),
            as_real(require(j, "pitch_deg", path), join(path, "pitch_deg"))};
}

json cue_to_json(const Cue& cue) {
    json j{{"id", cue.id}, {"at_ms", cue.at_ms}, {"duration_ms", cue.duration_ms}, {"anchor", direction_to_json(cue.anchor)}};
    std::visit(
        [&j](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, TextCue>) {
                j["kind"] = "text";
                j["body"] = k.body;
            } else if constexpr (std::is_same_v<T, ArrowCue>) {
                j["kind"] = "arrow";
                j["target"] = direction_to_json(k.target);
            } else {
                j["kind"] = "haptic";
                j["target"] = direction_to_json(k.target);
            }
        },
        cue.kind);
    return j;
}

Cue cue_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(ParseError::Kind::wrong_type, path, path + " must be an object");
    Cue c;
    c.id = req_string(j, "id", path);
    c.at_ms = req_int(j, "at_ms", path);
    c.duration_ms = req_int(j, "duration_ms", path);
    const std::string kind = req_string(j, "kind", path);
    if (kind == "text") {
        c.kind = TextCue{req_string(j, "body", path)};
    } else if (kind == "arrow") {
        c.kind = ArrowCue{direction_from_json(require(j, "target", path), join(path, "target"))};
    } else if (kind == "haptic") {
        c.kind = HapticCue{direction_from_json(require(j, "target", path), join(path, "target"))};
    } else {
        throw ParseError(ParseError::Kind::wrong_type, join(path, "kind"), "unknown cue kind '" + kind + "'");
    }
    if (auto it = j.find("anchor"); it != j.end()) c.anchor = direction_from_json(*it, join(path, "anchor"));
    return c;
}

StudyConfig parse_study(std::string_view text) {
    json doc = json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) throw ParseError(ParseError::Kind::malformed_json, "", "study file is not valid JSON");
    if (!doc.is_object()) throw ParseError(ParseError::Kind::wrong_type, "", "study file must be a JSON object");

    StudyConfig cfg;
    const std::int64_t version = req_int(doc, "version", "");
    cfg.version = static_cast<int>(std::clamp<std::int64_t>(version, -1, 1 << 30));
    cfg.session_label = req_string(doc, "session_label", "");
    const json& media = require(doc, "media", "");
    if (!media.is_object()) throw ParseError(ParseError::Kind::wrong_type, "media", "media must be an object");
    cfg.media = media_from_json(media, "media");

    const json& tracks = req_array(doc, "audio_tracks", "");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const std::string path = "audio_tracks[" + std::to_string(i) + "]";
        if (!tracks[i].is_object()) throw ParseError(ParseError::Kind::wrong_type, path, path + " must be an object");
        cfg.audio_tracks.push_back(audio_from_json(tracks[i], path));
    }
    const json& cues = req_array(doc, "cues", "");
    for (std::size_t i = 0; i < cues.size(); ++i) {
        cfg.cues.push_back(cue_from_json(cues[i], "cues[" + std::to_string(i) + "]"));
    }
    return cfg;
}

std::vector<Violation> validate_study(const StudyConfig& cfg) {
    std::vector<Violation> out;
    if (cfg.version != 1) out.push_back({ViolationKind::unsupported_version, std::to_string(cfg.version)});
    if (cfg.media.projection != "equirectangular") out.push_back({ViolationKind::unsupported_projection, cfg.media.projection});
    if (cfg.media.width_px <= 0 || cfg.media.height_px <= 0 || cfg.media.width_px % 2 != 0) {
        out.push_back({ViolationKind::invalid_dimensions, "media"});
    }
    if (cfg.media.duration_ms < 0) out.push_back({ViolationKind::negative_media_duration, "media"});

    std::set<std::string> seen;
    std::set<std::string> reported;
    for (const Cue& c : cfg.cues) {
        if (!seen.insert(c.id).second && reported.insert(c.id).second) {
            out.push_back({ViolationKind::duplicate_cue_id, c.id});
        }
        if (c.at_ms < 0) out.push_back({ViolationKind::cue_before_start, c.id});
        if (c.at_ms > cfg.media.duration_ms) out.push_back({ViolationKind::cue_after_media_end, c.id});
        if (c.duration_ms <= 0) out.push_back({ViolationKind::non_positive_cue_duration, c.id});
        if (const auto* text = std::get_if<TextCue>(&c.kind); text && text->body.empty()) {
            out.push_back({ViolationKind::empty_text_body, c.id});
        }
        check_direction(c.anchor, c.id, out);
        if (const auto* a = std::get_if<ArrowCue>(&c.kind)) check_direction(a->target, c.id, out);
        if (const auto* h = std::get_if<HapticCue>(&c.kind)) check_direction(h->target, c.id, out);
    }

    seen.clear();
    reported.clear();
    for (const AudioTrack& a : cfg.audio_tracks) {
        if (!seen.insert(a.id).second && reported.insert(a.id).second) {
            out.push_back({ViolationKind::duplicate_audio_id, a.id});
        }
        if (a.start_ms < 0) out.push_back({ViolationKind::audio_before_start, a.id});
        if (a.start_ms > cfg.media.duration_ms) out.push_back({ViolationKind::audio_after_media_end, a.id});
        if (!(a.gain >= 0.0 && a.gain <= 1.0)) out.push_back({ViolationKind::gain_out_of_range, a.id});
        if (a.mode.kind == AudioMode::Kind::spatial) check_direction(a.mode.anchor, a.id, out);
    }
    return out;
}

StudyConfig canonicalize(StudyConfig cfg) {
    for (Cue& c : cfg.cues) {
        c.anchor = wrapped(c.anchor);
        if (auto* a = std::get_if<ArrowCue>(&c.kind)) a->target = wrapped(a->target);
        if (auto* h = std::get_if<HapticCue>(&c.kind)) h->target = wrapped(h->target);
    }
    for (AudioTrack& a : cfg.audio_tracks) a.mode.anchor = wrapped(a.mode.anchor);
    std::stable_sort(cfg.cues.begin(), cfg.cues.end(), cue_order);
    return cfg;
}

bool is_canonical(const StudyConfig& cfg) { return canonicalize(cfg) == cfg; }

std::string serialize_study(const StudyConfig& cfg) {
    json j{{"version", cfg.version},
           {"session_label", cfg.session_label},
           {"media",
            {{"url", cfg.media.url},
             {"duration_ms", cfg.media.duration_ms},
             {"projection", cfg.media.projection},
             {"width_px", cfg.media.width_px},
             {"height_px", cfg.media.height_px}}},
           {"audio_tracks", json::array()},
           {"cues", json::array()}};
    for (const AudioTrack& a : cfg.audio_tracks) j["audio_tracks"].push_back(audio_to_json(a));
    for (const Cue& c : cfg.cues) j["cues"].push_back(cue_to_json(c));
    return j.dump(2);
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::unsupported_version: return "unsupported_version";
        case ViolationKind::unsupported_projection: return "unsupported_projection";
        case ViolationKind::invalid_dimensions: return "invalid_dimensions";
        case ViolationKind::negative_media_duration: return "negative_media_duration";
        case ViolationKind::duplicate_cue_id: return "duplicate_cue_id";
        case ViolationKind::duplicate_audio_id: return "duplicate_audio_id";
        case ViolationKind::cue_before_start: return "cue_before_start";
        case ViolationKind::cue_after_media_end: return "cue_after_media_end";
        case ViolationKind::non_positive_cue_duration: return "non_positive_cue_duration";
        case ViolationKind::empty_text_body: return "empty_text_body";
        case ViolationKind::audio_before_start: return "audio_before_start";
        case ViolationKind::audio_after_media_end: return "audio_after_media_end";
        case ViolationKind::gain_out_of_range: return "gain_out_of_range";
        case ViolationKind::yaw_out_of_range: return "yaw_out_of_range";
        case ViolationKind::pitch_out_of_range: return "pitch_out_of_range";
    }
    return "unknown";
}

std::string to_string(const Violation& v) {
    return std::string(to_string(v.kind)) + "(\"" + v.subject + "\")";
}

}  // namespace study360
