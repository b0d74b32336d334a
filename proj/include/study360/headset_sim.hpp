#pragma once

// Headless stand-in for the headset runtime. SimClient holds the protocol
// logic and head kinematics; it never reads a clock or touches a socket, so
// the same client runs against the loopback harness (virtual clock) and the
// network transport (wall clock).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "study360/geometry.hpp"
#include "study360/protocol.hpp"

namespace study360 {

struct Keyframe {
    std::int64_t t_ms = 0;
    Direction direction;
};

struct MotionScript {
    std::vector<Keyframe> keyframes;  // strictly increasing t_ms, first at 0
};

/// Parses a JSON list of [t_ms, yaw_deg, pitch_deg] triples. Throws ParseError
/// for shape problems and std::invalid_argument for ordering problems.
MotionScript parse_motion_script(std::string_view json_text);

/// Piecewise linear in pitch and along the shortest yaw arc. Times outside
/// the script clamp to the end keyframes. Throws std::invalid_argument on an
/// empty script.
Direction interpolate_pose(const MotionScript& script, std::int64_t t_ms);

/// Moves along the great circle toward `target` by at most
/// max_speed_deg_per_s * dt_ms / 1000 degrees, landing exactly on the target
/// when it is within one step.
Direction seek_step(const Direction& current, const Direction& target, std::int64_t dt_ms, double max_speed_deg_per_s);

struct ScriptedBehavior {
    MotionScript script;
};

struct SeekBehavior {
    double max_speed_deg_per_s = 90.0;
    std::int64_t reaction_latency_ms = 0;
};

struct SimConfig {
    int pose_rate_hz = 30;  // [1, 90]
    std::variant<ScriptedBehavior, SeekBehavior> behavior = SeekBehavior{};
    double half_fov_deg = 45.0;  // "looking at" threshold for alignment events
    std::optional<std::string> session_id;

    /// Throws std::invalid_argument when out of range.
    void validate() const;
};

struct AlignmentEvent {
    std::string cue_id;
    std::int64_t cue_received_ms = 0;  // server-aligned
    std::int64_t aligned_ms = 0;       // server-aligned timestamp of the first pose within half_fov
};

struct SimReport {
    std::int64_t poses_sent = 0;
    std::int64_t cues_received = 0;
    std::int64_t cue_acks = 0;
    std::vector<AlignmentEvent> alignment_events;
    double clock_offset_ms = 0.0;
    std::int64_t rtt_ms = 0;
    bool session_completed = false;
    std::optional<std::string> error;

    nlohmann::json to_json() const;
};

class SimClient {
public:
    using SendFn = std::function<void(std::string)>;

    SimClient(SimConfig config, SendFn send);

    /// Sends Hello and the first clock-sync Ping.
    void start(std::int64_t local_now_ms);

    void on_text(std::string_view text, std::int64_t local_now_ms);

    /// Emits a pose if one is due. Call at least once per pose period.
    void step(std::int64_t local_now_ms);

    bool done() const noexcept { return done_; }
    bool synced() const noexcept { return synced_; }
    const SimReport& report() const noexcept { return report_; }

    /// Every pose sent, with server-aligned timestamps.
    const std::vector<msg::Pose>& sent_poses() const noexcept { return sent_poses_; }

    /// Current head direction.
    const Direction& gaze() const noexcept { return gaze_; }

private:
    struct PendingTarget {
        std::int64_t active_from_ms = 0;  // local clock
        std::string cue_id;
        Direction target;
        std::int64_t received_server_ms = 0;
    };

    std::int64_t to_server(std::int64_t local_ms) const;
    void advance_motion(std::int64_t local_now_ms);
    void send(const Message& m);

    SimConfig config_;
    SendFn send_;
    SimReport report_;
    std::vector<msg::Pose> sent_poses_;

    bool started_ = false;
    bool welcomed_ = false;
    bool synced_ = false;
    bool done_ = false;
    std::int64_t ping_t0_ = 0;

    std::int64_t motion_origin_ms_ = 0;  // local time the first pose was scheduled
    std::int64_t poses_scheduled_ = 0;
    std::int64_t last_motion_ms_ = 0;
    Direction gaze_;

    std::vector<PendingTarget> pending_targets_;
    std::optional<PendingTarget> active_target_;
    std::vector<PendingTarget> unaligned_;
};

}  // namespace study360
