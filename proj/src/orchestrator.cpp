#include "study360/orchestrator.hpp"

#include <cstdlib>

namespace study360 {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

// Log records ----------------------------------------------------------------

std::string encode_log_record(const LogRecord& r) {
    json j{{"t_recv_ms", r.t_recv_ms},
           {"direction", r.direction == LogDirection::in ? "in" : "out"},
           {"peer_role", r.peer_role ? json(std::string(to_string(*r.peer_role))) : json(nullptr)},
           {"msg", to_json(r.msg)}};
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

LogRecord decode_log_record(std::string_view line) {
    json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProtocolError(ProtocolError::Kind::bad_json, "", "log line is not a JSON object");
    LogRecord r;
    auto t = j.find("t_recv_ms");
    if (t == j.end()) throw ProtocolError(ProtocolError::Kind::missing_field, "t_recv_ms", "missing t_recv_ms");
    if (!t->is_number_integer()) throw ProtocolError(ProtocolError::Kind::invalid_field, "t_recv_ms", "t_recv_ms must be an integer");
    r.t_recv_ms = t->get<std::int64_t>();
    auto d = j.find("direction");
    if (d == j.end()) throw ProtocolError(ProtocolError::Kind::missing_field, "direction", "missing direction");
    if (*d == "in") {
        r.direction = LogDirection::in;
    } else if (*d == "out") {
        r.direction = LogDirection::out;
    } else {
        throw ProtocolError(ProtocolError::Kind::invalid_field, "direction", "direction must be in or out");
    }
    if (auto p = j.find("peer_role"); p != j.end() && !p->is_null()) {
        if (!p->is_string()) throw ProtocolError(ProtocolError::Kind::invalid_field, "peer_role", "peer_role must be a string");
        r.peer_role = role_from_string(p->get<std::string>());
        if (!r.peer_role) throw ProtocolError(ProtocolError::Kind::invalid_field, "peer_role", "unknown peer_role");
    }
    auto m = j.find("msg");
    if (m == j.end()) throw ProtocolError(ProtocolError::Kind::missing_field, "msg", "missing msg");
    r.msg = from_json(*m);
    return r;
}

JsonlLogWriter::JsonlLogWriter(const std::filesystem::path& path) : path_(path) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::out | std::ios::app | std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open log file " + path_.string());
}

void JsonlLogWriter::write(const LogRecord& record) {
    LogRecord r = record;
    // Keep the file's timestamps non-decreasing even if a transport hands in
    // a stale clock reading.
    if (r.t_recv_ms < last_t_) r.t_recv_ms = last_t_;
    last_t_ = r.t_recv_ms;
    out_ << encode_log_record(r) << '\n';
    out_.flush();
}

std::filesystem::path resolve_log_path(const std::filesystem::path& requested) {
    if (const char* dir = std::getenv("STUDY360_LOG_DIR"); dir != nullptr && *dir != '\0') {
        return std::filesystem::path(dir) / requested.filename();
    }
    return requested;
}

// Hub --------------------------------------------------------------------------

Hub::Hub(StudyConfig cfg, HubOptions options, LogSink* log)
    : session_(new_session(canonicalize(std::move(cfg)))),
      options_(std::move(options)),
      log_(log),
      monitor_(options_.rules) {}

ConnId Hub::connect(std::shared_ptr<Peer> peer) {
    const ConnId id = next_id_++;
    conns_[id] = Conn{std::move(peer), std::nullopt};
    return id;
}

void Hub::disconnect(ConnId id) { conns_.erase(id); }

bool Hub::role_taken(Role r) const {
    if (r == Role::observer) return false;
    for (const auto& [_, c] : conns_) {
        if (c.role == r) return true;
    }
    return false;
}

void Hub::send_to(ConnId id, const Message& m) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    if (log_) log_->write({now_ms_, LogDirection::out, it->second.role, m});
    it->second.peer->send(encode(m));
}

void Hub::broadcast(const Message& m, bool include_headset) {
    std::vector<ConnId> targets;
    for (const auto& [id, c] : conns_) {
        if (!c.role) continue;
        if (*c.role == Role::headset && !include_headset) continue;
        targets.push_back(id);
    }
    for (ConnId id : targets) send_to(id, m);
}

void Hub::reject(ConnId id, std::string code, std::string message, bool close) {
    send_to(id, msg::Err{std::move(code), std::move(message)});
    if (!close) return;
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    auto peer = it->second.peer;
    conns_.erase(it);
    peer->close();
}

void Hub::publish(const std::vector<Event>& events) {
    std::vector<std::string> skipped;
    for (const Event& e : events) {
        std::visit(overloaded{
                       [&](const ev::CueFired& f) {
                           fired_order_.push_back(f.cue.id);
                           broadcast(msg::CueMsg{f.cue, f.position_ms}, true);
                       },
                       [&](const ev::CueSkipped& s) {
                           skipped_order_.push_back(s.id);
                           skipped.push_back(s.id);
                       },
                       [&](const ev::StateChanged& s) {
                           broadcast(msg::State{s.state, s.position_ms, skipped}, true);
                           skipped.clear();
                       },
                       [](const ev::SessionCompleted&) {},
                   },
                   e);
    }
}

void Hub::apply(const Command& c, std::int64_t now_ms, std::optional<ConnId> requester,
                const std::optional<std::string>& origin) {
    Transition t = tick(session_, now_ms);
    session_ = std::move(t.session);
    publish(t.events);
    try {
        Transition r = apply_command(session_, c, now_ms);
        session_ = std::move(r.session);
        if (origin) broadcast(msg::Cmd{c, origin}, false);
        publish(r.events);
    } catch (const CommandError& e) {
        if (requester) send_to(*requester, msg::Err{std::string(to_string(e.kind())), e.what()});
    }
}

void Hub::advance(std::int64_t now_ms) {
    now_ms_ = now_ms;
    Transition t = tick(session_, now_ms);
    session_ = std::move(t.session);
    publish(t.events);
    if (options_.heartbeat_ms > 0 && now_ms - last_heartbeat_ms_ >= options_.heartbeat_ms) {
        last_heartbeat_ms_ = now_ms;
        broadcast(msg::State{session_.state(), session_.position_at(now_ms), {}}, false);
    }
}

void Hub::on_text(ConnId id, std::string_view text, std::int64_t now_ms) {
    now_ms_ = now_ms;
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    Message m;
    try {
        m = decode(text);
    } catch (const ProtocolError& e) {
        reject(id, std::string(to_string(e.kind())), e.what(), !it->second.role.has_value());
        return;
    }
    std::optional<Role> logged_role = it->second.role;
    if (const auto* hello = std::get_if<msg::Hello>(&m); hello && !logged_role) logged_role = hello->role;
    if (log_) log_->write({now_ms, LogDirection::in, logged_role, m});
    handle(id, it->second, m, now_ms);
}

void Hub::handle(ConnId id, Conn& conn, const Message& m, std::int64_t now_ms) {
    if (!conn.role) {
        const auto* hello = std::get_if<msg::Hello>(&m);
        if (hello == nullptr) {
            reject(id, "handshake_required", "the first message must be hello", true);
            return;
        }
        if (hello->session_id && *hello->session_id != options_.session_id) {
            reject(id, "unknown_session", "no session '" + *hello->session_id + "'", true);
            return;
        }
        if (role_taken(hello->role)) {
            reject(id, "role_taken", std::string(to_string(hello->role)) + " is already connected", true);
            return;
        }
        conn.role = hello->role;
        std::vector<std::string> skipped = skipped_order_;
        send_to(id, msg::Welcome{options_.session_id, now_ms, session_.state(), session_.position_at(now_ms), fired_order_,
                                 std::move(skipped)});
        return;
    }

    const Role role = *conn.role;
    auto require_role = [&](Role needed, std::string_view what) {
        if (role == needed) return true;
        reject(id, "forbidden", std::string(what) + " is only accepted from the " + std::string(to_string(needed)), false);
        return false;
    };

    std::visit(overloaded{
                   [&](const msg::Hello&) { reject(id, "already_greeted", "hello was already accepted", false); },
                   [&](const msg::Cmd& c) {
                       if (require_role(Role::researcher, "command")) apply(c.command, now_ms, id, std::nullopt);
                   },
                   [&](const msg::Pose& p) {
                       if (!require_role(Role::headset, "pose")) return;
                       latest_pose_ = p;
                       broadcast(p, false);
                   },
                   [&](const msg::Biometric& b) {
                       if (!require_role(Role::headset, "biometric")) return;
                       broadcast(b, false);
                       for (const BiometricTrigger& t : monitor_.feed({b.t_ms, b.pulse_bpm})) {
                           apply(t.command, now_ms, std::nullopt, std::string("biometric_rule"));
                       }
                   },
                   [&](const msg::CueAck& a) {
                       if (require_role(Role::headset, "cue_ack")) broadcast(a, false);
                   },
                   [&](const msg::Ping& p) { send_to(id, msg::Pong{p.t0_ms, now_ms}); },
                   [](const msg::Err&) {},
                   [&](const auto&) {
                       reject(id, "unexpected_message", std::string(type_name(m)) + " is sent by the server only", false);
                   },
               },
               m);
}

}  // namespace study360
