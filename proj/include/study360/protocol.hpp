#pragma once

// Researcher / orchestrator / headset message set.
//
// Every message is one JSON object with a "type" discriminator and "v":1.
// Over WebSocket each text frame carries one message; over raw TCP each
// message is prefixed with its 4-byte big-endian length.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "study360/geometry.hpp"
#include "study360/session.hpp"

namespace study360 {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFramePayload = 16u * 1024u * 1024u;

enum class Role { researcher, headset, observer };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

namespace msg {
struct Hello {
    Role role = Role::observer;
    std::optional<std::string> session_id;
    int protocol_version = kProtocolVersion;
    friend bool operator==(const Hello&, const Hello&) = default;
};
struct Welcome {
    std::string session_id;
    std::int64_t server_time_ms = 0;
    SessionState state;
    std::int64_t position_ms = 0;
    std::vector<std::string> fired;
    std::vector<std::string> skipped;
    friend bool operator==(const Welcome&, const Welcome&) = default;
};
struct Cmd {
    Command command;
    std::optional<std::string> origin;  // set when the server issued it, e.g. "biometric_rule"
    friend bool operator==(const Cmd&, const Cmd&) = default;
};
struct State {
    SessionState state;
    std::int64_t position_ms = 0;
    std::vector<std::string> skipped;  // cues skipped by the transition that produced this state
    friend bool operator==(const State&, const State&) = default;
};
struct CueMsg {
    Cue cue;
    std::optional<std::int64_t> position_ms;  // session position at which it fired
    friend bool operator==(const CueMsg&, const CueMsg&) = default;
};
struct CueAck {
    std::string cue_id;
    std::int64_t t_ms = 0;
    friend bool operator==(const CueAck&, const CueAck&) = default;
};
struct Pose {
    std::int64_t t_ms = 0;
    Quat q;
    friend bool operator==(const Pose&, const Pose&) = default;
};
struct Biometric {
    std::int64_t t_ms = 0;
    double pulse_bpm = 0.0;
    friend bool operator==(const Biometric&, const Biometric&) = default;
};
struct Ping {
    std::int64_t t0_ms = 0;
    friend bool operator==(const Ping&, const Ping&) = default;
};
struct Pong {
    std::int64_t t0_ms = 0;
    std::int64_t server_time_ms = 0;
    friend bool operator==(const Pong&, const Pong&) = default;
};
struct Err {
    std::string code;
    std::string message;
    friend bool operator==(const Err&, const Err&) = default;
};
}  // namespace msg

using Message = std::variant<msg::Hello, msg::Welcome, msg::Cmd, msg::State, msg::CueMsg, msg::CueAck, msg::Pose,
                             msg::Biometric, msg::Ping, msg::Pong, msg::Err>;

/// Wire discriminator, e.g. "cue_ack".
std::string_view type_name(const Message& m);

class ProtocolError : public std::runtime_error {
public:
    enum class Kind { bad_json, unknown_type, bad_version, missing_field, invalid_field };

    ProtocolError(Kind kind, std::string detail, const std::string& what)
        : std::runtime_error(what), kind_(kind), detail_(std::move(detail)) {}

    Kind kind() const noexcept { return kind_; }
    /// Field name, type string or version number depending on kind.
    const std::string& detail() const noexcept { return detail_; }

private:
    Kind kind_;
    std::string detail_;
};

std::string_view to_string(ProtocolError::Kind kind);

nlohmann::json to_json(const Message& m);
nlohmann::json state_to_json(const SessionState& s);
nlohmann::json command_to_json(const Command& c);

/// Single-line JSON text.
std::string encode(const Message& m);

/// Never throws anything but ProtocolError, whatever the input bytes.
Message decode(std::string_view text);

/// Same as decode() for an already parsed object.
Message from_json(const nlohmann::json& j);

// Raw-stream framing ---------------------------------------------------------

class FrameError : public std::runtime_error {
public:
    enum class Kind { oversize, truncated };

    FrameError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// 4-byte big-endian length followed by the payload bytes.
std::string frame(std::string_view payload);

struct Unframed {
    std::string payload;
    std::size_t consumed = 0;
};

/// Decodes the frame at the start of `bytes`; trailing bytes are left for the caller.
Unframed unframe(std::string_view bytes);

/// Reassembles frames from arbitrarily chunked stream reads.
class FrameDecoder {
public:
    /// Returns every payload completed by this chunk. Throws FrameError{oversize}
    /// as soon as a header declares more than kMaxFramePayload bytes.
    std::vector<std::string> push(std::string_view chunk);

    std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    std::string buffer_;
};

// Clock synchronisation ------------------------------------------------------

struct ClockOffset {
    double offset_ms = 0.0;  // server_clock - client_clock
    std::int64_t rtt_ms = 0;
    friend bool operator==(const ClockOffset&, const ClockOffset&) = default;
};

/// NTP-style single exchange estimate; exact when one-way delays are equal.
ClockOffset estimate_offset(std::int64_t t0_ms, std::int64_t server_time_ms, std::int64_t t1_ms);

}  // namespace study360
