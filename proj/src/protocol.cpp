#include "study360/protocol.hpp"

#include <cmath>

namespace study360 {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void missing(const std::string& name) {
    throw ProtocolError(ProtocolError::Kind::missing_field, name, "missing field '" + name + "'");
}

[[noreturn]] void invalid(const std::string& name, const std::string& why) {
    throw ProtocolError(ProtocolError::Kind::invalid_field, name, "field '" + name + "': " + why);
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) missing(name);
    return *it;
}

std::int64_t get_int(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_integer()) invalid(name, "expected integer");
    return v.get<std::int64_t>();
}

double get_real(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) invalid(name, "expected number");
    return v.get<double>();
}

std::string get_string(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) invalid(name, "expected string");
    return v.get<std::string>();
}

std::optional<std::string> opt_string(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) invalid(name, "expected string");
    return it->get<std::string>();
}

std::vector<std::string> opt_string_list(const json& j, const char* name) {
    std::vector<std::string> out;
    auto it = j.find(name);
    if (it == j.end()) return out;
    if (!it->is_array()) invalid(name, "expected array");
    for (const json& v : *it) {
        if (!v.is_string()) invalid(name, "expected array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

// ParseError from the shared cue/direction readers maps onto wire errors.
template <class F>
auto translating(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ParseError& e) {
        if (e.kind() == ParseError::Kind::missing_field) missing(e.field());
        invalid(e.field(), e.what());
    }
}

SessionState state_from_json(const json& j, const char* name) {
    if (!j.is_object()) invalid(name, "expected object");
    auto it = j.find("phase");
    if (it == j.end()) missing(std::string(name) + ".phase");
    if (!it->is_string()) invalid(std::string(name) + ".phase", "expected string");
    const std::string phase = it->get<std::string>();
    if (phase == "loaded") return Loaded{};
    if (phase == "running") return Running{get_int(j, "start_anchor_ms")};
    if (phase == "paused") return Paused{get_int(j, "position_ms")};
    if (phase == "completed") return Completed{};
    invalid(std::string(name) + ".phase", "unknown phase '" + phase + "'");
}

Command command_from_json(const json& j) {
    const std::string action = get_string(j, "action");
    if (action == "start") return cmd::Start{};
    if (action == "pause") return cmd::Pause{};
    if (action == "resume") return cmd::Resume{};
    if (action == "stop") return cmd::Stop{};
    if (action == "seek") return cmd::Seek{get_int(j, "to_ms")};
    if (action == "inject_cue") {
        const json& c = field(j, "cue");
        return cmd::InjectCue{translating([&] { return cue_from_json(c, "cue"); })};
    }
    invalid("action", "unknown action '" + action + "'");
}

Quat quat_from_json(const json& j) {
    const json& q = field(j, "q");
    if (!q.is_array() || q.size() != 4) invalid("q", "expected [w,x,y,z]");
    for (const json& v : q) {
        if (!v.is_number()) invalid("q", "expected numbers");
    }
    Quat out{q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()};
    const double n = quat_norm(out);
    if (!std::isfinite(n) || n == 0.0) invalid("q", "quaternion must be non-zero and finite");
    if (std::abs(n - 1.0) > 1e-6) out = normalized(out);
    return out;
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::researcher: return "researcher";
        case Role::headset: return "headset";
        case Role::observer: return "observer";
    }
    return "observer";
}

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "researcher") return Role::researcher;
    if (s == "headset") return Role::headset;
    if (s == "observer") return Role::observer;
    return std::nullopt;
}

std::string_view to_string(ProtocolError::Kind kind) {
    switch (kind) {
        case ProtocolError::Kind::bad_json: return "bad_json";
        case ProtocolError::Kind::unknown_type: return "unknown_type";
        case ProtocolError::Kind::bad_version: return "bad_version";
        case ProtocolError::Kind::missing_field: return "missing_field";
        case ProtocolError::Kind::invalid_field: return "invalid_field";
    }
    return "unknown";
}

std::string_view type_name(const Message& m) {
    return std::visit(overloaded{
                          [](const msg::Hello&) { return std::string_view("hello"); },
                          [](const msg::Welcome&) { return std::string_view("welcome"); },
                          [](const msg::Cmd&) { return std::string_view("command"); },
                          [](const msg::State&) { return std::string_view("state"); },
                          [](const msg::CueMsg&) { return std::string_view("cue"); },
                          [](const msg::CueAck&) { return std::string_view("cue_ack"); },
                          [](const msg::Pose&) { return std::string_view("pose"); },
                          [](const msg::Biometric&) { return std::string_view("biometric"); },
                          [](const msg::Ping&) { return std::string_view("ping"); },
                          [](const msg::Pong&) { return std::string_view("pong"); },
                          [](const msg::Err&) { return std::string_view("error"); },
                      },
                      m);
}

json state_to_json(const SessionState& s) {
    json j{{"phase", std::string(phase_name(s))}};
    if (const auto* r = std::get_if<Running>(&s)) j["start_anchor_ms"] = r->start_anchor_ms;
    if (const auto* p = std::get_if<Paused>(&s)) j["position_ms"] = p->position_ms;
    return j;
}

json command_to_json(const Command& c) {
    json j{{"action", std::string(command_name(c))}};
    if (const auto* s = std::get_if<cmd::Seek>(&c)) j["to_ms"] = s->to_ms;
    if (const auto* i = std::get_if<cmd::InjectCue>(&c)) j["cue"] = cue_to_json(i->cue);
    return j;
}

json to_json(const Message& m) {
    json j = std::visit(
        overloaded{
            [](const msg::Hello& h) {
                json o{{"role", std::string(to_string(h.role))}, {"protocol_version", h.protocol_version}};
                if (h.session_id) o["session_id"] = *h.session_id;
                return o;
            },
            [](const msg::Welcome& w) {
                return json{{"session_id", w.session_id}, {"server_time_ms", w.server_time_ms},
                            {"state", state_to_json(w.state)}, {"position_ms", w.position_ms},
                            {"fired", w.fired},           {"skipped", w.skipped}};
            },
            [](const msg::Cmd& c) {
                json o = command_to_json(c.command);
                if (c.origin) o["origin"] = *c.origin;
                return o;
            },
            [](const msg::State& s) {
                return json{{"state", state_to_json(s.state)}, {"position_ms", s.position_ms}, {"skipped", s.skipped}};
            },
            [](const msg::CueMsg& c) {
                json o{{"cue", cue_to_json(c.cue)}};
                if (c.position_ms) o["position_ms"] = *c.position_ms;
                return o;
            },
            [](const msg::CueAck& a) { return json{{"cue_id", a.cue_id}, {"t_ms", a.t_ms}}; },
            [](const msg::Pose& p) { return json{{"t_ms", p.t_ms}, {"q", {p.q.w, p.q.x, p.q.y, p.q.z}}}; },
            [](const msg::Biometric& b) { return json{{"t_ms", b.t_ms}, {"pulse_bpm", b.pulse_bpm}}; },
            [](const msg::Ping& p) { return json{{"t0_ms", p.t0_ms}}; },
            [](const msg::Pong& p) { return json{{"t0_ms", p.t0_ms}, {"server_time_ms", p.server_time_ms}}; },
            [](const msg::Err& e) { return json{{"code", e.code}, {"message", e.message}}; },
        },
        m);
    j["type"] = std::string(type_name(m));
    j["v"] = kProtocolVersion;
    return j;
}

std::string encode(const Message& m) { return to_json(m).dump(-1, ' ', false, json::error_handler_t::replace); }

Message from_json(const json& j) {
    if (!j.is_object()) throw ProtocolError(ProtocolError::Kind::bad_json, "", "message must be a JSON object");
    const json& type_field = field(j, "type");
    if (!type_field.is_string()) invalid("type", "expected string");
    const std::string type = type_field.get<std::string>();

    static constexpr std::string_view kTypes[] = {"hello", "welcome", "command",   "state", "cue",  "cue_ack",
                                                  "pose",  "biometric", "ping",    "pong",  "error"};
    bool known = false;
    for (std::string_view t : kTypes) known = known || t == type;
    if (!known) throw ProtocolError(ProtocolError::Kind::unknown_type, type, "unknown message type '" + type + "'");

    const json& v = field(j, "v");
    if (!v.is_number_integer() || v.get<std::int64_t>() != kProtocolVersion) {
        const std::string shown = v.dump(-1, ' ', false, json::error_handler_t::replace);
        throw ProtocolError(ProtocolError::Kind::bad_version, shown, "unsupported protocol version " + shown);
    }

    if (type == "hello") {
        msg::Hello h;
        const std::string role = get_string(j, "role");
        const auto parsed = role_from_string(role);
        if (!parsed) invalid("role", "unknown role '" + role + "'");
        h.role = *parsed;
        h.session_id = opt_string(j, "session_id");
        const json& pv = field(j, "protocol_version");
        if (!pv.is_number_integer() || pv.get<std::int64_t>() != kProtocolVersion) {
            const std::string shown = pv.dump(-1, ' ', false, json::error_handler_t::replace);
            throw ProtocolError(ProtocolError::Kind::bad_version, shown, "unsupported protocol version " + shown);
        }
        return h;
    }
    if (type == "welcome") {
        msg::Welcome w;
        w.session_id = get_string(j, "session_id");
        w.server_time_ms = get_int(j, "server_time_ms");
        w.state = state_from_json(field(j, "state"), "state");
        if (j.contains("position_ms")) w.position_ms = get_int(j, "position_ms");
        w.fired = opt_string_list(j, "fired");
        w.skipped = opt_string_list(j, "skipped");
        return w;
    }
    // Fields are read into locals before aggregate initialisation: GCC 11
    // leaks already-built members when a later initialiser throws.
    if (type == "command") {
        Command c = command_from_json(j);
        auto origin = opt_string(j, "origin");
        return msg::Cmd{std::move(c), std::move(origin)};
    }
    if (type == "state") {
        SessionState st = state_from_json(field(j, "state"), "state");
        const std::int64_t position = get_int(j, "position_ms");
        auto skipped = opt_string_list(j, "skipped");
        return msg::State{std::move(st), position, std::move(skipped)};
    }
    if (type == "cue") {
        msg::CueMsg c;
        const json& cue = field(j, "cue");
        c.cue = translating([&] { return cue_from_json(cue, "cue"); });
        if (j.contains("position_ms")) c.position_ms = get_int(j, "position_ms");
        return c;
    }
    if (type == "cue_ack") {
        std::string id = get_string(j, "cue_id");
        const std::int64_t t = get_int(j, "t_ms");
        return msg::CueAck{std::move(id), t};
    }
    if (type == "pose") return msg::Pose{get_int(j, "t_ms"), quat_from_json(j)};
    if (type == "biometric") return msg::Biometric{get_int(j, "t_ms"), get_real(j, "pulse_bpm")};
    if (type == "ping") return msg::Ping{get_int(j, "t0_ms")};
    if (type == "pong") return msg::Pong{get_int(j, "t0_ms"), get_int(j, "server_time_ms")};
    std::string code = get_string(j, "code");
    std::string message = get_string(j, "message");
    return msg::Err{std::move(code), std::move(message)};
}

Message decode(std::string_view text) {
    json j = json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded()) throw ProtocolError(ProtocolError::Kind::bad_json, "", "message is not valid JSON");
    try {
        return from_json(j);
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(ProtocolError::Kind::bad_json, "", e.what());
    }
}

// Framing --------------------------------------------------------------------

std::string frame(std::string_view payload) {
    if (payload.size() > kMaxFramePayload) {
        throw FrameError(FrameError::Kind::oversize, "payload of " + std::to_string(payload.size()) + " bytes exceeds 16 MiB");
    }
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.append(payload);
    return out;
}

namespace {

std::uint32_t read_be32(std::string_view b) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

}  // namespace

Unframed unframe(std::string_view bytes) {
    if (bytes.size() < 4) throw FrameError(FrameError::Kind::truncated, "frame header needs 4 bytes");
    const std::uint32_t n = read_be32(bytes);
    if (n > kMaxFramePayload) throw FrameError(FrameError::Kind::oversize, "declared length exceeds 16 MiB");
    if (bytes.size() - 4 < n) {
        throw FrameError(FrameError::Kind::truncated, "declared length " + std::to_string(n) + " with " +
                                                          std::to_string(bytes.size() - 4) + " bytes available");
    }
    return {std::string(bytes.substr(4, n)), 4 + static_cast<std::size_t>(n)};
}

std::vector<std::string> FrameDecoder::push(std::string_view chunk) {
    buffer_.append(chunk);
    std::vector<std::string> out;
    std::size_t offset = 0;
    while (buffer_.size() - offset >= 4) {
        const std::uint32_t n = read_be32(std::string_view(buffer_).substr(offset));
        if (n > kMaxFramePayload) throw FrameError(FrameError::Kind::oversize, "declared length exceeds 16 MiB");
        if (buffer_.size() - offset - 4 < n) break;
        out.emplace_back(buffer_, offset + 4, n);
        offset += 4 + n;
    }
    buffer_.erase(0, offset);
    return out;
}

ClockOffset estimate_offset(std::int64_t t0_ms, std::int64_t server_time_ms, std::int64_t t1_ms) {
    const std::int64_t rtt = t1_ms - t0_ms;
    return {static_cast<double>(server_time_ms) - (static_cast<double>(t0_ms) + static_cast<double>(rtt) / 2.0), rtt};
}

}  // namespace study360
