#pragma once

// Millisecond-step reference model of the cue scheduler plus the random
// schedules used to compare it with the real state machine.

#include <map>
#include <set>

#include "study360/session.hpp"
#include "support.hpp"

namespace study360::test {

// Cue ids from CueFired ('F') and CueSkipped ('S') events, in order.
using CueLog = std::vector<std::pair<char, std::string>>;

inline void append_cue_events(const std::vector<Event>& events, CueLog& out) {
    for (const Event& e : events) {
        if (const auto* f = std::get_if<ev::CueFired>(&e)) out.emplace_back('F', f->cue.id);
        if (const auto* s = std::get_if<ev::CueSkipped>(&e)) out.emplace_back('S', s->id);
    }
}

// Reference model: advances the session one millisecond at a time, firing
// every due cue at each step and before every command.
class ReferenceSim {
public:
    explicit ReferenceSim(const StudyConfig& cfg) : duration_(cfg.media.duration_ms) {
        for (const Cue& c : cfg.cues) remaining_.insert({c.at_ms, c.id});
        for (const Cue& c : cfg.cues) ids_.insert(c.id);
    }

    void step_one_ms() {
        if (phase_ != Phase::running) return;
        position_ = std::min(position_ + 1, duration_);
        fire_due();
        if (position_ >= duration_) phase_ = Phase::completed;
    }

    // Returns false when the command is rejected.
    bool command(const Command& c) {
        if (phase_ == Phase::running) fire_due();
        if (std::holds_alternative<cmd::Start>(c)) {
            if (phase_ != Phase::loaded) return false;
            phase_ = Phase::running;
            position_ = 0;
        } else if (std::holds_alternative<cmd::Pause>(c)) {
            if (phase_ != Phase::running) return false;
            phase_ = Phase::paused;
        } else if (std::holds_alternative<cmd::Resume>(c)) {
            if (phase_ != Phase::paused) return false;
            phase_ = Phase::running;
        } else if (const auto* s = std::get_if<cmd::Seek>(&c)) {
            if (phase_ != Phase::running && phase_ != Phase::paused) return false;
            if (s->to_ms < 0 || s->to_ms > duration_) return false;
            for (auto it = remaining_.begin(); it != remaining_.end();) {
                if (it->first > position_ && it->first <= s->to_ms) {
                    log.emplace_back('S', it->second);
                    it = remaining_.erase(it);
                } else {
                    ++it;
                }
            }
            position_ = s->to_ms;
        } else if (std::holds_alternative<cmd::Stop>(c)) {
            if (phase_ == Phase::completed) return false;
            phase_ = Phase::completed;
        } else if (const auto* inj = std::get_if<cmd::InjectCue>(&c)) {
            if (phase_ == Phase::completed) return false;
            if (inj->cue.at_ms < position_ || inj->cue.at_ms > duration_ || ids_.count(inj->cue.id)) return false;
            ids_.insert(inj->cue.id);
            remaining_.insert({inj->cue.at_ms, inj->cue.id});
        }
        return true;
    }

    CueLog log;

private:
    enum class Phase { loaded, running, paused, completed };

    void fire_due() {
        while (!remaining_.empty() && remaining_.begin()->first <= position_) {
            log.emplace_back('F', remaining_.begin()->second);
            remaining_.erase(remaining_.begin());
        }
    }

    std::int64_t duration_;
    Phase phase_ = Phase::loaded;
    std::int64_t position_ = 0;
    std::set<std::pair<std::int64_t, std::string>> remaining_;
    std::set<std::string> ids_;
};

struct Op {
    std::int64_t t = 0;
    std::optional<Command> command;  // empty means a plain tick
};

inline std::vector<Op> random_schedule(std::mt19937_64& rng, const StudyConfig& cfg) {
    const std::int64_t d = cfg.media.duration_ms;
    const std::int64_t horizon = d + d / 3 + 10;
    std::uniform_int_distribution<std::int64_t> when(0, horizon);
    std::uniform_int_distribution<int> pick(0, 99);
    std::uniform_int_distribution<std::int64_t> seek_to(-10, d + 10);
    std::uniform_int_distribution<std::int64_t> inject_at(0, d + 5);
    std::vector<Op> ops;
    const int n = 10 + static_cast<int>(rng() % 50);
    ops.push_back({static_cast<std::int64_t>(rng() % (horizon / 4 + 1)), Command{cmd::Start{}}});
    for (int i = 0; i < n; ++i) {
        Op op{when(rng), std::nullopt};
        const int p = pick(rng);
        if (p < 45) {
            // tick
        } else if (p < 55) {
            op.command = cmd::Pause{};
        } else if (p < 65) {
            op.command = cmd::Resume{};
        } else if (p < 80) {
            op.command = cmd::Seek{seek_to(rng)};
        } else if (p < 83) {
            op.command = cmd::Stop{};
        } else if (p < 86) {
            op.command = cmd::Start{};
        } else {
            // Occasionally reuse an id to exercise duplicate rejection.
            const std::string id = (p < 89 && !cfg.cues.empty()) ? cfg.cues.front().id : "inj" + std::to_string(i);
            op.command = cmd::InjectCue{text_cue(id, inject_at(rng))};
        }
        ops.push_back(std::move(op));
    }
    std::stable_sort(ops.begin(), ops.end(), [](const Op& a, const Op& b) { return a.t < b.t; });
    return ops;
}

struct DriveResult {
    CueLog log;
    std::vector<bool> accepted;
    std::vector<Event> events;
};

// Drives the real state machine: tick at every op time, then apply the command.
inline DriveResult drive(const StudyConfig& cfg, const std::vector<Op>& ops, bool tick_before_commands) {
    DriveResult r;
    Session s = new_session(cfg);
    auto take = [&](Transition t) {
        append_cue_events(t.events, r.log);
        r.events.insert(r.events.end(), t.events.begin(), t.events.end());
        s = std::move(t.session);
    };
    for (const Op& op : ops) {
        if (!op.command || tick_before_commands) take(tick(s, op.t));
        if (!op.command) continue;
        try {
            take(apply_command(s, *op.command, op.t));
            r.accepted.push_back(true);
        } catch (const CommandError&) {
            r.accepted.push_back(false);
        }
    }
    return r;
}

inline DriveResult reference(const StudyConfig& cfg, const std::vector<Op>& ops) {
    DriveResult r;
    ReferenceSim sim(cfg);
    std::int64_t now = 0;
    for (const Op& op : ops) {
        while (now < op.t) {
            ++now;
            sim.step_one_ms();
        }
        if (op.command) r.accepted.push_back(sim.command(*op.command));
    }
    r.log = sim.log;
    return r;
}

}  // namespace study360::test
