#pragma once

// Deterministic session state machine and cue scheduler.
//
// The machine never reads a clock. Every transition takes the caller's
// wall-clock `now_ms`, so any recorded command/tick sequence replays to the
// same events. Transitions are pure: they take a Session by value and return
// the successor together with the events it produced.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "study360/study_config.hpp"

namespace study360 {

struct Loaded {
    friend bool operator==(const Loaded&, const Loaded&) = default;
};
struct Running {
    std::int64_t start_anchor_ms = 0;  // wall clock at which position was 0
    friend bool operator==(const Running&, const Running&) = default;
};
struct Paused {
    std::int64_t position_ms = 0;
    friend bool operator==(const Paused&, const Paused&) = default;
};
struct Completed {
    friend bool operator==(const Completed&, const Completed&) = default;
};

using SessionState = std::variant<Loaded, Running, Paused, Completed>;

std::string_view phase_name(const SessionState& s);

namespace cmd {
struct Start {
    friend bool operator==(const Start&, const Start&) = default;
};
struct Pause {
    friend bool operator==(const Pause&, const Pause&) = default;
};
struct Resume {
    friend bool operator==(const Resume&, const Resume&) = default;
};
struct Seek {
    std::int64_t to_ms = 0;
    friend bool operator==(const Seek&, const Seek&) = default;
};
struct Stop {
    friend bool operator==(const Stop&, const Stop&) = default;
};
struct InjectCue {
    Cue cue;
    friend bool operator==(const InjectCue&, const InjectCue&) = default;
};
}  // namespace cmd

using Command = std::variant<cmd::Start, cmd::Pause, cmd::Resume, cmd::Seek, cmd::Stop, cmd::InjectCue>;

std::string_view command_name(const Command& c);

namespace ev {
struct StateChanged {
    SessionState state;
    std::int64_t position_ms = 0;
    friend bool operator==(const StateChanged&, const StateChanged&) = default;
};
struct CueFired {
    Cue cue;
    std::int64_t position_ms = 0;
    friend bool operator==(const CueFired&, const CueFired&) = default;
};
struct CueSkipped {
    std::string id;
    friend bool operator==(const CueSkipped&, const CueSkipped&) = default;
};
struct SessionCompleted {
    friend bool operator==(const SessionCompleted&, const SessionCompleted&) = default;
};
}  // namespace ev

using Event = std::variant<ev::StateChanged, ev::CueFired, ev::CueSkipped, ev::SessionCompleted>;

class CommandError : public std::runtime_error {
public:
    enum class Kind { invalid_transition, seek_out_of_range, inject_in_past, duplicate_cue_id, cue_out_of_range };

    CommandError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(CommandError::Kind kind);

class Session {
public:
    const StudyConfig& config() const noexcept { return config_; }
    const SessionState& state() const noexcept { return state_; }
    const std::set<std::string>& fired() const noexcept { return fired_; }
    const std::set<std::string>& skipped() const noexcept { return skipped_; }
    const std::vector<Cue>& injected_cues() const noexcept { return injected_; }
    /// Cues neither fired nor skipped, in firing order.
    const std::vector<Cue>& pending() const noexcept { return pending_; }

    /// Session position at wall time `now_ms`, clamped to [0, media duration].
    std::int64_t position_at(std::int64_t now_ms) const;

    std::int64_t duration_ms() const noexcept { return config_.media.duration_ms; }

    /// Looks up a cue from the study or injected at runtime.
    const Cue* find_cue(std::string_view id) const;

private:
    friend Session new_session(StudyConfig cfg);
    friend struct Transition apply_command(Session s, const Command& command, std::int64_t now_ms);
    friend struct Transition tick(Session s, std::int64_t now_ms);
    friend struct SessionOps;

    StudyConfig config_;
    SessionState state_ = Loaded{};
    std::set<std::string> fired_;
    std::set<std::string> skipped_;
    std::vector<Cue> injected_;
    std::vector<Cue> pending_;
    std::int64_t final_position_ms_ = 0;
};

struct Transition {
    Session session;
    std::vector<Event> events;
};

/// Throws std::invalid_argument for configs that are invalid or not canonical.
Session new_session(StudyConfig cfg);

/// Throws CommandError for rejected commands; the session is left untouched.
Transition apply_command(Session s, const Command& command, std::int64_t now_ms);

Transition tick(Session s, std::int64_t now_ms);

// Biometric rules ------------------------------------------------------------

struct BiometricRule {
    enum class Metric { pulse_bpm };
    enum class Comparator { greater, less };

    Metric metric = Metric::pulse_bpm;
    Comparator comparator = Comparator::greater;
    double threshold = 0.0;
    std::int64_t sustain_ms = 0;
    Command action = cmd::Pause{};
};

struct BiometricSample {
    std::int64_t t_ms = 0;
    double value = 0.0;
};

struct BiometricTrigger {
    std::int64_t t_ms = 0;
    std::size_t rule_index = 0;
    Command command;
};

/// Incremental rule evaluation with hysteresis: a rule fires once its
/// condition has held for sustain_ms and re-arms only after the condition has
/// been false for sustain_ms.
class BiometricMonitor {
public:
    explicit BiometricMonitor(std::vector<BiometricRule> rules);

    /// Samples must arrive in non-decreasing t_ms order.
    std::vector<BiometricTrigger> feed(const BiometricSample& sample);

    const std::vector<BiometricRule>& rules() const noexcept { return rules_; }

private:
    struct RuleState {
        bool armed = true;
        std::optional<std::int64_t> true_since;
        std::optional<std::int64_t> false_since;
    };
    std::vector<BiometricRule> rules_;
    std::vector<RuleState> states_;
};

std::vector<BiometricTrigger> eval_biometric(const std::vector<BiometricRule>& rules,
                                             const std::vector<BiometricSample>& history);

}  // namespace study360
