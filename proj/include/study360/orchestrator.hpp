#pragma once

// Session hub: owns the one Session, applies researcher and biometric-rule
// commands, fans events out to connected peers and records every message in
// the event log.
//
// The hub is single-threaded by contract. Transports (WebSocket, raw TCP,
// in-process loopback) funnel every call through one ordered executor and
// pass the server clock reading explicitly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "study360/gaze.hpp"
#include "study360/protocol.hpp"
#include "study360/session.hpp"

namespace study360 {

enum class LogDirection { in, out };

struct LogRecord {
    std::int64_t t_recv_ms = 0;  // server clock
    LogDirection direction = LogDirection::in;
    std::optional<Role> peer_role;  // unset before the peer's Hello was accepted
    Message msg;
};

std::string encode_log_record(const LogRecord& r);

/// Throws ProtocolError (bad_json/missing_field/invalid_field) for a malformed line.
LogRecord decode_log_record(std::string_view line);

class LogSink {
public:
    virtual ~LogSink() = default;
    virtual void write(const LogRecord& record) = 0;
};

/// Append-only JSONL file, one record per line, flushed after every record.
class JsonlLogWriter final : public LogSink {
public:
    explicit JsonlLogWriter(const std::filesystem::path& path);
    void write(const LogRecord& record) override;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::int64_t last_t_ = 0;
};

class MemoryLog final : public LogSink {
public:
    void write(const LogRecord& record) override { records.push_back(record); }
    std::vector<LogRecord> records;
};

/// Resolves the log path, honouring STUDY360_LOG_DIR.
std::filesystem::path resolve_log_path(const std::filesystem::path& requested);

class Peer {
public:
    virtual ~Peer() = default;
    virtual void send(const std::string& text) = 0;
    virtual void close() = 0;
};

using ConnId = std::uint64_t;

struct HubOptions {
    std::string session_id = "session";
    std::vector<BiometricRule> rules;
    std::int64_t heartbeat_ms = 1000;  // State to researcher/observers; 0 disables
};

class Hub {
public:
    /// `cfg` must be valid; it is canonicalised here. `log` may be null.
    Hub(StudyConfig cfg, HubOptions options, LogSink* log);

    ConnId connect(std::shared_ptr<Peer> peer);
    void on_text(ConnId id, std::string_view text, std::int64_t now_ms);
    void disconnect(ConnId id);

    /// Ticks the session and sends heartbeats. Call often (every few ms).
    void advance(std::int64_t now_ms);

    const Session& session() const noexcept { return session_; }
    const std::string& session_id() const noexcept { return options_.session_id; }
    std::size_t connection_count() const noexcept { return conns_.size(); }
    const std::vector<std::string>& fired_order() const noexcept { return fired_order_; }
    std::optional<msg::Pose> latest_pose() const { return latest_pose_; }

private:
    struct Conn {
        std::shared_ptr<Peer> peer;
        std::optional<Role> role;
    };

    void handle(ConnId id, Conn& conn, const Message& m, std::int64_t now_ms);
    void apply(const Command& c, std::int64_t now_ms, std::optional<ConnId> requester, const std::optional<std::string>& origin);
    void publish(const std::vector<Event>& events);
    void send_to(ConnId id, const Message& m);
    void broadcast(const Message& m, bool include_headset);
    void reject(ConnId id, std::string code, std::string message, bool close);
    bool role_taken(Role r) const;

    Session session_;
    HubOptions options_;
    LogSink* log_;
    BiometricMonitor monitor_;
    std::map<ConnId, Conn> conns_;
    ConnId next_id_ = 1;
    std::int64_t now_ms_ = 0;
    std::int64_t last_heartbeat_ms_ = 0;
    std::vector<std::string> fired_order_;
    std::vector<std::string> skipped_order_;
    std::optional<msg::Pose> latest_pose_;
};

// Replay and analysis ----------------------------------------------------------

struct ReplayedCue {
    Cue cue;
    std::int64_t position_ms = 0;  // session position when fired
    std::int64_t t_server_ms = 0;  // server time the cue went out
};

struct ReplayedCommand {
    std::int64_t t_ms = 0;
    Command command;
    std::optional<std::string> origin;
};

struct Replay {
    GazeTrace trace;
    std::vector<ReplayedCue> fired;
    std::vector<std::string> skipped;
    std::vector<BiometricSample> biometrics;
    std::vector<ReplayedCommand> commands;  // accepted or not, as received from the researcher
    std::size_t corrupt_lines = 0;
};

Replay replay_lines(std::istream& in);
Replay replay_trace(const std::filesystem::path& log_path);

struct AnalyzeOptions {
    std::optional<std::vector<Aoi>> aois;
    std::int32_t grid_cols = 36;
    std::int32_t grid_rows = 18;
    double half_fov_deg = 45.0;
};

struct AnalysisReport {
    std::string report_json;  // byte-identical for identical inputs
    std::string heatmap_pgm;
};

AnalysisReport analyze(const Replay& replay, const AnalyzeOptions& options);
AnalysisReport analyze(const std::filesystem::path& log_path, const AnalyzeOptions& options);

/// The cue as seen on the server clock: at_ms moved to the time it went out.
Cue rebased_to_server_time(const ReplayedCue& fired);

std::vector<BiometricRule> parse_rules(std::string_view json_text);

}  // namespace study360
