#include "study360/loopback.hpp"

#include <deque>

namespace study360 {

namespace {

enum class Endpoint { hub_from_researcher, hub_from_headset, researcher, headset };

struct Packet {
    std::int64_t deliver_at = 0;
    Endpoint to = Endpoint::hub_from_researcher;
    std::string text;
};

struct Wire {
    std::int64_t now = 0;
    std::int64_t delay = 0;
    std::deque<Packet> queue;  // deliver_at is non-decreasing since delay is fixed

    void post(Endpoint to, std::string text) { queue.push_back({now + delay, to, std::move(text)}); }
};

class QueuedPeer final : public Peer {
public:
    QueuedPeer(Wire& wire, Endpoint to) : wire_(wire), to_(to) {}
    void send(const std::string& text) override {
        if (!closed_) wire_.post(to_, text);
    }
    void close() override { closed_ = true; }
    bool closed() const { return closed_; }

private:
    Wire& wire_;
    Endpoint to_;
    bool closed_ = false;
};

}  // namespace

LoopbackResult run_loopback(const StudyConfig& cfg, const HubOptions& hub_options, const SimConfig& sim_config,
                            const LoopbackOptions& options) {
    MemoryLog log;
    Hub hub(cfg, hub_options, &log);
    Wire wire;
    wire.delay = options.one_way_delay_ms;
    LoopbackResult result;

    auto researcher_peer = std::make_shared<QueuedPeer>(wire, Endpoint::researcher);
    auto headset_peer = std::make_shared<QueuedPeer>(wire, Endpoint::headset);
    std::optional<ConnId> researcher_id;
    if (options.connect_researcher) researcher_id = hub.connect(researcher_peer);
    const ConnId headset_id = hub.connect(headset_peer);

    SimClient sim(sim_config, [&](std::string text) { wire.post(Endpoint::hub_from_headset, std::move(text)); });
    const std::int64_t skew = options.sim_clock_skew_ms;

    auto deliver = [&](std::int64_t t) {
        while (!wire.queue.empty() && wire.queue.front().deliver_at <= t) {
            Packet p = std::move(wire.queue.front());
            wire.queue.pop_front();
            switch (p.to) {
                case Endpoint::hub_from_researcher:
                    if (researcher_id) hub.on_text(*researcher_id, p.text, t);
                    break;
                case Endpoint::hub_from_headset:
                    hub.on_text(headset_id, p.text, t);
                    break;
                case Endpoint::researcher:
                    result.researcher_inbox.push_back(decode(p.text));
                    break;
                case Endpoint::headset:
                    sim.on_text(p.text, t + skew);
                    break;
            }
        }
    };

    std::size_t next_command = 0;
    std::int64_t t = 0;
    for (; t <= options.duration_ms; ++t) {
        wire.now = t;
        if (t == 0) {
            if (researcher_id) wire.post(Endpoint::hub_from_researcher, encode(msg::Hello{Role::researcher, hub_options.session_id}));
            sim.start(t + skew);
        }
        deliver(t);
        hub.advance(t);
        deliver(t);
        sim.step(t + skew);
        deliver(t);
        while (researcher_id && next_command < options.researcher_commands.size() &&
               options.researcher_commands[next_command].first <= t) {
            wire.post(Endpoint::hub_from_researcher, encode(msg::Cmd{options.researcher_commands[next_command].second, {}}));
            ++next_command;
        }
        if (options.pulse && options.biometric_period_ms > 0 && t % options.biometric_period_ms == 0) {
            if (auto bpm = options.pulse(t)) wire.post(Endpoint::hub_from_headset, encode(msg::Biometric{t, *bpm}));
        }
        deliver(t);
        if (options.stop_when_done && sim.done() && std::holds_alternative<Completed>(hub.session().state())) break;
    }

    result.report = sim.report();
    result.log = std::move(log.records);
    result.sent_poses = sim.sent_poses();
    result.fired_order = hub.fired_order();
    result.final_state = hub.session().state();
    result.ended_at_ms = std::min(t, options.duration_ms);
    return result;
}

}  // namespace study360
