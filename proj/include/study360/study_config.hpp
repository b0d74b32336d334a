#pragma once

// Study file model: media manifest, audio tracks and timed cues.
//
// Parsing checks shape only. Semantic problems are reported by
// validate_study() as a full list so researchers can fix everything in one
// pass. canonicalize() produces the form the session scheduler accepts.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "study360/geometry.hpp"

namespace study360 {

struct MediaRef {
    std::string url;
    std::int64_t duration_ms = 0;
    std::string projection = "equirectangular";
    std::int64_t width_px = 0;
    std::int64_t height_px = 0;

    friend bool operator==(const MediaRef&, const MediaRef&) = default;
};

struct AudioMode {
    enum class Kind { mono, spatial };
    Kind kind = Kind::mono;
    Direction anchor;  // meaningful only for spatial

    friend bool operator==(const AudioMode&, const AudioMode&) = default;
};

struct AudioTrack {
    std::string id;
    std::string url;
    std::int64_t start_ms = 0;
    double gain = 1.0;
    AudioMode mode;

    friend bool operator==(const AudioTrack&, const AudioTrack&) = default;
};

struct TextCue {
    std::string body;
    friend bool operator==(const TextCue&, const TextCue&) = default;
};

struct ArrowCue {
    Direction target;
    friend bool operator==(const ArrowCue&, const ArrowCue&) = default;
};

struct HapticCue {
    Direction target;
    friend bool operator==(const HapticCue&, const HapticCue&) = default;
};

using CueKind = std::variant<TextCue, ArrowCue, HapticCue>;

struct Cue {
    std::string id;
    std::int64_t at_ms = 0;
    std::int64_t duration_ms = 0;
    CueKind kind;
    Direction anchor;  // (0, 0) is front and centre

    friend bool operator==(const Cue&, const Cue&) = default;
};

struct StudyConfig {
    int version = 1;
    std::string session_label;
    MediaRef media;
    std::vector<AudioTrack> audio_tracks;
    std::vector<Cue> cues;

    friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

class ParseError : public std::runtime_error {
public:
    enum class Kind { malformed_json, missing_field, wrong_type };

    ParseError(Kind kind, std::string field, const std::string& what);

    Kind kind() const noexcept { return kind_; }
    /// Dotted path of the offending field, e.g. "cues[2].at_ms". Empty for malformed_json.
    const std::string& field() const noexcept { return field_; }

private:
    Kind kind_;
    std::string field_;
};

enum class ViolationKind {
    unsupported_version,
    unsupported_projection,
    invalid_dimensions,
    negative_media_duration,
    duplicate_cue_id,
    duplicate_audio_id,
    cue_before_start,
    cue_after_media_end,
    non_positive_cue_duration,
    empty_text_body,
    audio_before_start,
    audio_after_media_end,
    gain_out_of_range,
    yaw_out_of_range,
    pitch_out_of_range,
};

struct Violation {
    ViolationKind kind;
    std::string subject;  // cue/track id or field name

    friend bool operator==(const Violation&, const Violation&) = default;
};

std::string_view to_string(ViolationKind kind);

/// Renders as e.g. `cue_after_media_end("a")`.
std::string to_string(const Violation& v);

StudyConfig parse_study(std::string_view text);

std::vector<Violation> validate_study(const StudyConfig& cfg);

/// Sorts cues by (at_ms, id) and wraps every yaw into [-180, 180). Idempotent.
StudyConfig canonicalize(StudyConfig cfg);

bool is_canonical(const StudyConfig& cfg);

std::string serialize_study(const StudyConfig& cfg);

// JSON pieces shared with the wire protocol. Errors are ParseError with the
// field path prefixed by `path`.
nlohmann::json direction_to_json(const Direction& d);
Direction direction_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json cue_to_json(const Cue& cue);
Cue cue_from_json(const nlohmann::json& j, const std::string& path);

/// Orders cues the way the scheduler fires them.
inline bool cue_order(const Cue& a, const Cue& b) {
    return a.at_ms != b.at_ms ? a.at_ms < b.at_ms : a.id < b.id;
}

}  // namespace study360
