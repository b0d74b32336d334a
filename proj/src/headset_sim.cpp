#include "study360/headset_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "study360/gaze.hpp"

namespace study360 {

using nlohmann::json;

MotionScript parse_motion_script(std::string_view json_text) {
    json doc = json::parse(json_text.begin(), json_text.end(), nullptr, false);
    if (doc.is_discarded()) throw ParseError(ParseError::Kind::malformed_json, "", "motion script is not valid JSON");
    if (!doc.is_array()) throw ParseError(ParseError::Kind::wrong_type, "", "motion script must be a JSON array");
    MotionScript script;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        const json& k = doc[i];
        if (!k.is_array() || k.size() != 3 || !k[0].is_number_integer() || !k[1].is_number() || !k[2].is_number()) {
            throw ParseError(ParseError::Kind::wrong_type, path, path + " must be [t_ms, yaw_deg, pitch_deg]");
        }
        script.keyframes.push_back({k[0].get<std::int64_t>(), {k[1].get<double>(), k[2].get<double>()}});
    }
    if (script.keyframes.empty()) throw std::invalid_argument("motion script has no keyframes");
    if (script.keyframes.front().t_ms != 0) throw std::invalid_argument("motion script must start at t_ms 0");
    for (std::size_t i = 1; i < script.keyframes.size(); ++i) {
        if (script.keyframes[i].t_ms <= script.keyframes[i - 1].t_ms) {
            throw std::invalid_argument("motion script keyframes must have strictly increasing t_ms");
        }
    }
    for (Keyframe& k : script.keyframes) k.direction.yaw_deg = wrap_yaw_deg(k.direction.yaw_deg);
    return script;
}

Direction interpolate_pose(const MotionScript& script, std::int64_t t_ms) {
    const auto& ks = script.keyframes;
    if (ks.empty()) throw std::invalid_argument("motion script is empty");
    if (t_ms <= ks.front().t_ms) return ks.front().direction;
    if (t_ms >= ks.back().t_ms) return ks.back().direction;
    const auto hi = std::upper_bound(ks.begin(), ks.end(), t_ms, [](std::int64_t t, const Keyframe& k) { return t < k.t_ms; });
    const Keyframe& b = *hi;
    const Keyframe& a = *(hi - 1);
    const double f = static_cast<double>(t_ms - a.t_ms) / static_cast<double>(b.t_ms - a.t_ms);
    const double dyaw = wrap_yaw_deg(b.direction.yaw_deg - a.direction.yaw_deg);
    return {wrap_yaw_deg(a.direction.yaw_deg + f * dyaw),
            a.direction.pitch_deg + f * (b.direction.pitch_deg - a.direction.pitch_deg)};
}

Direction seek_step(const Direction& current, const Direction& target, std::int64_t dt_ms, double max_speed_deg_per_s) {
    const double distance = angular_distance(current, target);
    const double step = max_speed_deg_per_s * static_cast<double>(std::max<std::int64_t>(dt_ms, 0)) / 1000.0;
    if (step >= distance) return target;
    if (step <= 0.0) return current;

    const Vec3 from = to_unit_vector(current);
    const Vec3 to = to_unit_vector(target);
    // Unit tangent at `from` pointing along the great circle toward `to`.
    Vec3 tangent = add(to, scale(from, -dot(from, to)));
    if (norm(tangent) < 1e-12) {
        // Antipodal target: every great circle works; turn horizontally.
        tangent = cross(Vec3{0.0, 1.0, 0.0}, from);
        if (norm(tangent) < 1e-12) tangent = Vec3{1.0, 0.0, 0.0};
    }
    tangent = scale(tangent, 1.0 / norm(tangent));
    const double theta = step * kDegToRad;
    return to_direction(add(scale(from, std::cos(theta)), scale(tangent, std::sin(theta))));
}

void SimConfig::validate() const {
    if (pose_rate_hz < 1 || pose_rate_hz > 90) throw std::invalid_argument("pose_rate_hz must be in [1, 90]");
    if (!(half_fov_deg > 0.0 && half_fov_deg <= 180.0)) throw std::invalid_argument("half_fov_deg must be in (0, 180]");
    if (const auto* seek = std::get_if<SeekBehavior>(&behavior)) {
        if (!(seek->max_speed_deg_per_s > 0.0)) throw std::invalid_argument("max_speed_deg_per_s must be positive");
        if (seek->reaction_latency_ms < 0) throw std::invalid_argument("reaction_latency_ms must be non-negative");
    } else if (std::get<ScriptedBehavior>(behavior).script.keyframes.empty()) {
        throw std::invalid_argument("scripted behavior needs a non-empty motion script");
    }
}

json SimReport::to_json() const {
    json events = json::array();
    for (const AlignmentEvent& e : alignment_events) {
        events.push_back({{"cue_id", e.cue_id}, {"cue_received_ms", e.cue_received_ms}, {"aligned_ms", e.aligned_ms},
                          {"latency_ms", e.aligned_ms - e.cue_received_ms}});
    }
    json j{{"poses_sent", poses_sent},
           {"cues_received", cues_received},
           {"cue_acks", cue_acks},
           {"alignment_events", events},
           {"clock_offset_ms", clock_offset_ms},
           {"rtt_ms", rtt_ms},
           {"session_completed", session_completed}};
    if (error) j["error"] = *error;
    return j;
}

SimClient::SimClient(SimConfig config, SendFn send) : config_(std::move(config)), send_(std::move(send)) {
    config_.validate();
}

void SimClient::send(const Message& m) { send_(encode(m)); }

std::int64_t SimClient::to_server(std::int64_t local_ms) const {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(local_ms) + report_.clock_offset_ms));
}

void SimClient::start(std::int64_t local_now_ms) {
    if (started_) return;
    started_ = true;
    send(msg::Hello{Role::headset, config_.session_id, kProtocolVersion});
    ping_t0_ = local_now_ms;
    send(msg::Ping{local_now_ms});
}

void SimClient::on_text(std::string_view text, std::int64_t local_now_ms) {
    Message m;
    try {
        m = decode(text);
    } catch (const ProtocolError& e) {
        report_.error = std::string("undecodable server message: ") + e.what();
        return;
    }

    if (const auto* err = std::get_if<msg::Err>(&m)) {
        report_.error = err->code + ": " + err->message;
        if (!welcomed_) done_ = true;
        return;
    }
    if (std::holds_alternative<msg::Welcome>(m)) {
        welcomed_ = true;
    } else if (const auto* pong = std::get_if<msg::Pong>(&m)) {
        if (pong->t0_ms == ping_t0_ && !synced_) {
            const ClockOffset off = estimate_offset(pong->t0_ms, pong->server_time_ms, local_now_ms);
            report_.clock_offset_ms = off.offset_ms;
            report_.rtt_ms = off.rtt_ms;
            synced_ = true;
            motion_origin_ms_ = local_now_ms;
            last_motion_ms_ = local_now_ms;
            if (const auto* scripted = std::get_if<ScriptedBehavior>(&config_.behavior)) {
                gaze_ = interpolate_pose(scripted->script, 0);
            }
        }
    } else if (const auto* cue = std::get_if<msg::CueMsg>(&m)) {
        ++report_.cues_received;
        const std::int64_t received = to_server(local_now_ms);
        send(msg::CueAck{cue->cue.id, received});
        ++report_.cue_acks;
        std::int64_t active_from = local_now_ms;
        if (const auto* seek = std::get_if<SeekBehavior>(&config_.behavior)) active_from += seek->reaction_latency_ms;
        pending_targets_.push_back({active_from, cue->cue.id, cue->cue.anchor, received});
        unaligned_.push_back(pending_targets_.back());
    } else if (const auto* state = std::get_if<msg::State>(&m)) {
        if (std::holds_alternative<Completed>(state->state)) {
            report_.session_completed = true;
            done_ = true;
        }
    }
}

namespace {
constexpr double kAlignmentSlackDeg = 1e-9;
}  // namespace

void SimClient::advance_motion(std::int64_t local_now_ms) {
    if (const auto* scripted = std::get_if<ScriptedBehavior>(&config_.behavior)) {
        gaze_ = interpolate_pose(scripted->script, local_now_ms - motion_origin_ms_);
        last_motion_ms_ = local_now_ms;
        return;
    }
    const double speed = std::get<SeekBehavior>(config_.behavior).max_speed_deg_per_s;
    auto move_until = [&](std::int64_t t) {
        if (t <= last_motion_ms_) return;
        if (active_target_) gaze_ = seek_step(gaze_, active_target_->target, t - last_motion_ms_, speed);
        last_motion_ms_ = t;
    };
    // Targets become active in arrival order once their reaction latency has passed.
    std::size_t consumed = 0;
    for (const PendingTarget& p : pending_targets_) {
        if (p.active_from_ms > local_now_ms) break;
        move_until(p.active_from_ms);
        active_target_ = p;
        ++consumed;
    }
    pending_targets_.erase(pending_targets_.begin(), pending_targets_.begin() + static_cast<std::ptrdiff_t>(consumed));
    move_until(local_now_ms);
}

void SimClient::step(std::int64_t local_now_ms) {
    if (!synced_ || done_) return;
    const std::int64_t due = (local_now_ms - motion_origin_ms_) * config_.pose_rate_hz / 1000;
    if (due < poses_scheduled_) return;
    poses_scheduled_ = due + 1;

    advance_motion(local_now_ms);
    msg::Pose pose{to_server(local_now_ms), direction_to_quat(gaze_)};
    sent_poses_.push_back(pose);
    ++report_.poses_sent;
    send(pose);

    // Alignment is tracked for every cue received so far, independent of
    // when the simulated participant starts turning. The small slack absorbs
    // rounding in the step-wise integrated head motion, which otherwise lands
    // a hair outside the threshold on exactly the boundary pose.
    auto still_open = unaligned_.begin();
    for (auto it = unaligned_.begin(); it != unaligned_.end(); ++it) {
        if (pose.t_ms >= it->received_server_ms && angular_distance(gaze_, it->target) <= config_.half_fov_deg + kAlignmentSlackDeg) {
            report_.alignment_events.push_back({it->cue_id, it->received_server_ms, pose.t_ms});
        } else {
            if (still_open != it) *still_open = std::move(*it);
            ++still_open;
        }
    }
    unaligned_.erase(still_open, unaligned_.end());
}

}  // namespace study360
