#pragma once

// In-process harness: one Hub, one SimClient headset and a scripted
// researcher, all driven by a virtual millisecond clock. Transport is a
// message queue with a fixed one-way delay, so whole sessions replay
// deterministically in tests.

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "study360/headset_sim.hpp"
#include "study360/orchestrator.hpp"

namespace study360 {

struct LoopbackOptions {
    std::int64_t duration_ms = 10'000;
    std::int64_t one_way_delay_ms = 0;
    std::int64_t sim_clock_skew_ms = 0;  // headset clock minus server clock
    std::vector<std::pair<std::int64_t, Command>> researcher_commands;  // server time, command
    bool connect_researcher = true;

    // Pulse readings sent over the headset connection every biometric_period_ms.
    std::function<std::optional<double>(std::int64_t server_ms)> pulse;
    std::int64_t biometric_period_ms = 1000;

    // Stop once the session completed and the headset saw it.
    bool stop_when_done = true;
};

struct LoopbackResult {
    SimReport report;
    std::vector<LogRecord> log;
    std::vector<Message> researcher_inbox;
    std::vector<msg::Pose> sent_poses;
    std::vector<std::string> fired_order;
    SessionState final_state;
    std::int64_t ended_at_ms = 0;
};

LoopbackResult run_loopback(const StudyConfig& cfg, const HubOptions& hub_options, const SimConfig& sim_config,
                            const LoopbackOptions& options);

}  // namespace study360
