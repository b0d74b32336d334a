#pragma once

// Network transport for the hub: one port serves the WebSocket endpoint
// (/ws), the media manifest (/manifest/{session_id}) and ranged media
// (/media/{id}); an optional second port speaks length-prefixed frames over
// raw TCP. All hub work runs on a single io_context thread.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "study360/headset_sim.hpp"
#include "study360/media.hpp"
#include "study360/orchestrator.hpp"

namespace study360::net {

struct ServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks a free port
    std::optional<std::uint16_t> tcp_port;
    std::int64_t tick_ms = 2;
};

class Server {
public:
    /// Throws MissingMedia if the study references a file the catalog lacks.
    Server(StudyConfig cfg, MediaCatalog catalog, HubOptions hub_options, LogSink* log, ServerOptions options);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Opens the listening sockets; start() and run() call it when needed.
    void bind();
    /// Binds and serves on a background thread.
    void start();
    /// Binds and serves on the calling thread until stop() or SIGINT/SIGTERM.
    void run();
    void stop();

    std::uint16_t port() const;
    std::optional<std::uint16_t> tcp_port() const;

    /// Runs `fn` on the server thread and waits for it.
    void with_hub(const std::function<void(Hub&)>& fn);

    /// Milliseconds on the server clock.
    std::int64_t now_ms() const;

    struct Impl;  // shared with the session classes in net.cpp

private:
    std::unique_ptr<Impl> impl_;
};

struct Endpoint {
    enum class Scheme { ws, tcp };
    Scheme scheme = Scheme::ws;
    std::string host;
    std::string port;
    std::string path = "/ws";
};

/// Accepts ws://host:port[/path] and tcp://host:port. Throws std::invalid_argument.
Endpoint parse_endpoint(std::string_view url);

/// Text-message client for either transport. Received messages queue up in
/// an inbox; send() may be called from any thread.
class TextClient {
public:
    explicit TextClient(const Endpoint& endpoint);
    ~TextClient();

    TextClient(const TextClient&) = delete;
    TextClient& operator=(const TextClient&) = delete;

    void send(std::string text);

    /// Pops the next message, waiting up to `timeout`.
    std::optional<std::string> receive(std::chrono::milliseconds timeout);

    /// True once the server closed the connection and the inbox is drained.
    bool closed() const;

    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Connects a SimClient to a running server and drives it on the wall clock
/// for up to duration_ms, or until the session completes.
SimReport run_sim(const Endpoint& endpoint, const SimConfig& config, std::int64_t duration_ms);

}  // namespace study360::net
