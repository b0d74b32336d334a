#pragma once

// Shared fixtures and generators for the test binaries.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "study360/study_config.hpp"

namespace study360::test {

inline constexpr const char* kMinimalStudy =
    R"({"version":1,"session_label":"s","media":{"url":"v.mp4","duration_ms":60000,"projection":"equirectangular",)"
    R"("width_px":3840,"height_px":1920},"audio_tracks":[],"cues":[{"id":"a","at_ms":1000,"duration_ms":3000,)"
    R"("kind":"text","body":"hello"}]})";

inline Cue text_cue(std::string id, std::int64_t at_ms, std::int64_t duration_ms = 1000, Direction anchor = {}) {
    Cue c;
    c.id = std::move(id);
    c.at_ms = at_ms;
    c.duration_ms = duration_ms;
    c.kind = TextCue{"cue " + c.id};
    c.anchor = anchor;
    return c;
}

inline StudyConfig make_study(std::int64_t duration_ms, std::vector<Cue> cues) {
    StudyConfig cfg;
    cfg.session_label = "test";
    cfg.media = MediaRef{"video.mp4", duration_ms, "equirectangular", 3840, 1920};
    cfg.cues = std::move(cues);
    return canonicalize(std::move(cfg));
}

inline Direction random_direction(std::mt19937_64& rng) {
    // Uniform on the sphere: uniform yaw, pitch = asin(uniform z).
    std::uniform_real_distribution<double> yaw(-180.0, 180.0);
    std::uniform_real_distribution<double> z(-1.0, 1.0);
    return {yaw(rng), std::asin(z(rng)) * 180.0 / M_PI};
}

/// Random valid (not necessarily canonical) study with up to max_cues cues.
inline StudyConfig random_study(std::mt19937_64& rng, std::size_t max_cues, std::int64_t max_duration_ms = 20'000) {
    StudyConfig cfg;
    cfg.session_label = "generated";
    std::uniform_int_distribution<std::int64_t> dur(1, max_duration_ms);
    cfg.media = MediaRef{"video.mp4", dur(rng), "equirectangular", 3840, 1920};
    std::uniform_int_distribution<std::size_t> ncues(0, max_cues);
    std::uniform_int_distribution<std::int64_t> at(0, cfg.media.duration_ms);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_real_distribution<double> wild_yaw(-540.0, 539.0);
    const std::size_t n = ncues(rng);
    for (std::size_t i = 0; i < n; ++i) {
        Cue c;
        c.id = "c" + std::to_string(i);
        // Clustered times make ties and simultaneous cues common.
        c.at_ms = (i % 3 == 0 && i > 0) ? cfg.cues[i - 1].at_ms : at(rng);
        c.duration_ms = 1 + static_cast<std::int64_t>(rng() % 5000);
        c.anchor = {wild_yaw(rng), random_direction(rng).pitch_deg};
        switch (kind(rng)) {
            case 0: c.kind = TextCue{"word" + std::to_string(i)}; break;
            case 1: c.kind = ArrowCue{{wild_yaw(rng), 0.0}}; break;
            default: c.kind = HapticCue{random_direction(rng)}; break;
        }
        cfg.cues.push_back(std::move(c));
    }
    std::shuffle(cfg.cues.begin(), cfg.cues.end(), rng);
    if (rng() % 2) {
        AudioTrack a;
        a.id = "narration";
        a.url = "narration.wav";
        a.start_ms = 0;
        a.gain = 0.5;
        a.mode = AudioMode{AudioMode::Kind::spatial, {wild_yaw(rng), 10.0}};
        cfg.audio_tracks.push_back(a);
    }
    return cfg;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("study360_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace study360::test
