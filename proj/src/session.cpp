#include "study360/session.hpp"

#include <algorithm>

namespace study360 {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

CommandError invalid(const SessionState& s, const Command& c) {
    return CommandError(CommandError::Kind::invalid_transition,
                        std::string(command_name(c)) + " is not allowed while " + std::string(phase_name(s)));
}

}  // namespace

std::string_view phase_name(const SessionState& s) {
    return std::visit(overloaded{
                          [](const Loaded&) { return std::string_view("loaded"); },
                          [](const Running&) { return std::string_view("running"); },
                          [](const Paused&) { return std::string_view("paused"); },
                          [](const Completed&) { return std::string_view("completed"); },
                      },
                      s);
}

std::string_view command_name(const Command& c) {
    return std::visit(overloaded{
                          [](const cmd::Start&) { return std::string_view("start"); },
                          [](const cmd::Pause&) { return std::string_view("pause"); },
                          [](const cmd::Resume&) { return std::string_view("resume"); },
                          [](const cmd::Seek&) { return std::string_view("seek"); },
                          [](const cmd::Stop&) { return std::string_view("stop"); },
                          [](const cmd::InjectCue&) { return std::string_view("inject_cue"); },
                      },
                      c);
}

std::string_view to_string(CommandError::Kind kind) {
    switch (kind) {
        case CommandError::Kind::invalid_transition: return "invalid_transition";
        case CommandError::Kind::seek_out_of_range: return "seek_out_of_range";
        case CommandError::Kind::inject_in_past: return "inject_in_past";
        case CommandError::Kind::duplicate_cue_id: return "duplicate_cue_id";
        case CommandError::Kind::cue_out_of_range: return "cue_out_of_range";
    }
    return "unknown";
}

std::int64_t Session::position_at(std::int64_t now_ms) const {
    return std::visit(overloaded{
                          [](const Loaded&) -> std::int64_t { return 0; },
                          [&](const Running& r) { return std::clamp<std::int64_t>(now_ms - r.start_anchor_ms, 0, duration_ms()); },
                          [](const Paused& p) { return p.position_ms; },
                          [&](const Completed&) { return final_position_ms_; },
                      },
                      state_);
}

const Cue* Session::find_cue(std::string_view id) const {
    for (const Cue& c : config_.cues) {
        if (c.id == id) return &c;
    }
    for (const Cue& c : injected_) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

// Mutating helpers; only reachable through the pure entry points below.
struct SessionOps {
    static void fire_due(Session& s, std::int64_t position, std::vector<Event>& events) {
        auto it = s.pending_.begin();
        while (it != s.pending_.end() && it->at_ms <= position) {
            s.fired_.insert(it->id);
            events.push_back(ev::CueFired{*it, position});
            ++it;
        }
        s.pending_.erase(s.pending_.begin(), it);
    }

    static void skip_between(Session& s, std::int64_t from_exclusive, std::int64_t to_inclusive,
                             std::vector<Event>& events) {
        auto keep = s.pending_.begin();
        for (auto it = s.pending_.begin(); it != s.pending_.end(); ++it) {
            if (it->at_ms > from_exclusive && it->at_ms <= to_inclusive) {
                s.skipped_.insert(it->id);
                events.push_back(ev::CueSkipped{it->id});
            } else {
                if (keep != it) *keep = std::move(*it);
                ++keep;
            }
        }
        s.pending_.erase(keep, s.pending_.end());
    }

    static void complete(Session& s, std::int64_t position, std::vector<Event>& events) {
        s.final_position_ms_ = position;
        s.state_ = Completed{};
        events.push_back(ev::StateChanged{s.state_, position});
        events.push_back(ev::SessionCompleted{});
    }

    static void seek(Session& s, std::int64_t old_position, std::int64_t to, std::vector<Event>& events) {
        if (to > old_position) skip_between(s, old_position, to, events);
    }

    static void inject(Session& s, const Cue& cue, std::int64_t position) {
        if (cue.at_ms < position) {
            throw CommandError(CommandError::Kind::inject_in_past,
                               "cue '" + cue.id + "' at " + std::to_string(cue.at_ms) + " ms is before position " +
                                   std::to_string(position));
        }
        if (cue.at_ms > s.duration_ms()) {
            throw CommandError(CommandError::Kind::cue_out_of_range, "cue '" + cue.id + "' is after the media end");
        }
        if (s.find_cue(cue.id) != nullptr) {
            throw CommandError(CommandError::Kind::duplicate_cue_id, "cue id '" + cue.id + "' already exists");
        }
        s.injected_.push_back(cue);
        s.pending_.insert(std::upper_bound(s.pending_.begin(), s.pending_.end(), cue, cue_order), cue);
    }
};

Session new_session(StudyConfig cfg) {
    if (const auto violations = validate_study(cfg); !violations.empty()) {
        throw std::invalid_argument("study config is invalid: " + to_string(violations.front()));
    }
    if (!is_canonical(cfg)) throw std::invalid_argument("study config is not canonical");
    Session s;
    s.config_ = std::move(cfg);
    s.pending_ = s.config_.cues;
    return s;
}

Transition apply_command(Session s, const Command& command, std::int64_t now_ms) {
    std::vector<Event> events;
    const SessionState before = s.state_;

    // Cues already due at `now` fire before the command takes effect.
    if (std::holds_alternative<Running>(s.state_)) SessionOps::fire_due(s, s.position_at(now_ms), events);

    const std::int64_t position = s.position_at(now_ms);

    std::visit(
        overloaded{
            [&](const cmd::Start&) {
                if (!std::holds_alternative<Loaded>(before)) throw invalid(before, command);
                s.state_ = Running{now_ms};
                events.push_back(ev::StateChanged{s.state_, 0});
            },
            [&](const cmd::Pause&) {
                if (!std::holds_alternative<Running>(before)) throw invalid(before, command);
                s.state_ = Paused{position};
                events.push_back(ev::StateChanged{s.state_, position});
            },
            [&](const cmd::Resume&) {
                if (!std::holds_alternative<Paused>(before)) throw invalid(before, command);
                s.state_ = Running{now_ms - position};
                events.push_back(ev::StateChanged{s.state_, position});
            },
            [&](const cmd::Seek& seek) {
                if (!std::holds_alternative<Running>(before) && !std::holds_alternative<Paused>(before)) {
                    throw invalid(before, command);
                }
                if (seek.to_ms < 0 || seek.to_ms > s.duration_ms()) {
                    throw CommandError(CommandError::Kind::seek_out_of_range,
                                       "seek target " + std::to_string(seek.to_ms) + " is outside [0, " +
                                           std::to_string(s.duration_ms()) + "]");
                }
                SessionOps::seek(s, position, seek.to_ms, events);
                if (std::holds_alternative<Running>(before)) {
                    s.state_ = Running{now_ms - seek.to_ms};
                } else {
                    s.state_ = Paused{seek.to_ms};
                }
                events.push_back(ev::StateChanged{s.state_, seek.to_ms});
            },
            [&](const cmd::Stop&) {
                if (std::holds_alternative<Completed>(before)) throw invalid(before, command);
                SessionOps::complete(s, position, events);
            },
            [&](const cmd::InjectCue& inject) {
                if (std::holds_alternative<Completed>(before)) throw invalid(before, command);
                SessionOps::inject(s, inject.cue, position);
            },
        },
        command);

    return {std::move(s), std::move(events)};
}

Transition tick(Session s, std::int64_t now_ms) {
    std::vector<Event> events;
    const auto* running = std::get_if<Running>(&s.state_);
    if (running == nullptr) return {std::move(s), std::move(events)};

    const std::int64_t raw = now_ms - running->start_anchor_ms;
    const std::int64_t position = s.position_at(now_ms);
    SessionOps::fire_due(s, position, events);
    if (raw >= s.duration_ms()) SessionOps::complete(s, position, events);
    return {std::move(s), std::move(events)};
}

// Biometric rules ------------------------------------------------------------

BiometricMonitor::BiometricMonitor(std::vector<BiometricRule> rules)
    : rules_(std::move(rules)), states_(rules_.size()) {}

std::vector<BiometricTrigger> BiometricMonitor::feed(const BiometricSample& sample) {
    std::vector<BiometricTrigger> out;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const BiometricRule& rule = rules_[i];
        RuleState& st = states_[i];
        const bool holds = rule.comparator == BiometricRule::Comparator::greater ? sample.value > rule.threshold
                                                                                 : sample.value < rule.threshold;
        if (holds) {
            st.false_since.reset();
            if (!st.true_since) st.true_since = sample.t_ms;
            if (st.armed && sample.t_ms - *st.true_since >= rule.sustain_ms) {
                st.armed = false;
                out.push_back({sample.t_ms, i, rule.action});
            }
        } else {
            st.true_since.reset();
            if (!st.false_since) st.false_since = sample.t_ms;
            if (!st.armed && sample.t_ms - *st.false_since >= rule.sustain_ms) st.armed = true;
        }
    }
    return out;
}

std::vector<BiometricTrigger> eval_biometric(const std::vector<BiometricRule>& rules,
                                             const std::vector<BiometricSample>& history) {
    BiometricMonitor monitor(rules);
    std::vector<BiometricTrigger> out;
    for (const BiometricSample& s : history) {
        auto fired = monitor.feed(s);
        out.insert(out.end(), std::make_move_iterator(fired.begin()), std::make_move_iterator(fired.end()));
    }
    return out;
}

}  // namespace study360
