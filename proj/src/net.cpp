#include "study360/net.hpp"

#include <array>
#include <csignal>
#include <fstream>
#include <future>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace study360::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using beast::error_code;

namespace {

// Serves [offset, offset + length) of a file without loading it into memory.
struct FileRangeBody {
    struct value_type {
        std::filesystem::path path;
        std::int64_t offset = 0;
        std::int64_t length = 0;
    };

    static std::uint64_t size(const value_type& v) { return static_cast<std::uint64_t>(v.length); }

    class writer {
    public:
        using const_buffers_type = asio::const_buffer;

        template <bool isRequest, class Fields>
        writer(const http::header<isRequest, Fields>&, const value_type& body) : body_(body), remaining_(body.length) {}

        void init(error_code& ec) {
            ec = {};
            if (remaining_ == 0) return;
            in_.open(body_.path, std::ios::binary);
            in_.seekg(body_.offset);
            if (!in_) ec = beast::errc::make_error_code(beast::errc::io_error);
        }

        boost::optional<std::pair<const_buffers_type, bool>> get(error_code& ec) {
            ec = {};
            if (remaining_ <= 0) return boost::none;
            const auto want = static_cast<std::streamsize>(std::min<std::int64_t>(remaining_, buf_.size()));
            in_.read(buf_.data(), want);
            const std::streamsize got = in_.gcount();
            if (got <= 0) {
                ec = beast::errc::make_error_code(beast::errc::io_error);
                return boost::none;
            }
            remaining_ -= got;
            return std::make_pair(asio::const_buffer(buf_.data(), static_cast<std::size_t>(got)), remaining_ > 0);
        }

    private:
        const value_type& body_;
        std::int64_t remaining_;
        std::ifstream in_;
        std::array<char, 1 << 16> buf_{};
    };
};

std::string_view path_of(std::string_view target) {
    const auto q = target.find('?');
    return q == std::string_view::npos ? target : target.substr(0, q);
}

}  // namespace

// Server -----------------------------------------------------------------------

struct Server::Impl {
    asio::io_context ioc{1};
    StudyConfig cfg;
    MediaCatalog catalog;
    Hub hub;
    ServerOptions options;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    tcp::acceptor http_acceptor{ioc};
    std::optional<tcp::acceptor> tcp_acceptor;
    asio::steady_timer ticker{ioc};
    std::thread thread;
    bool bound = false;

    Impl(StudyConfig c, MediaCatalog cat, HubOptions hub_options, LogSink* log, ServerOptions opts)
        : cfg(canonicalize(std::move(c))), catalog(std::move(cat)), hub(cfg, std::move(hub_options), log), options(std::move(opts)) {
        (void)build_manifest(cfg, catalog, "");  // throws MissingMedia early
    }

    std::int64_t now_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    }

    void bind();
    void accept_http();
    void accept_tcp();
    void schedule_tick();
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, Server::Impl& srv) : ws_(std::move(socket)), srv_(srv) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(kMaxFramePayload);
        ws_.async_accept(req, [self = shared_from_this()](error_code ec) { self->on_accept(ec); });
    }

    void send(const std::string& text) {
        if (closing_ || finished_) return;
        outq_.push_back(text);
        if (outq_.size() == 1) do_write();
    }

    void close() {
        if (closing_ || finished_) return;
        closing_ = true;
        if (outq_.empty()) do_close();
    }

private:
    class Link final : public Peer {
    public:
        explicit Link(std::weak_ptr<WsSession> s) : session_(std::move(s)) {}
        void send(const std::string& text) override {
            if (auto s = session_.lock()) s->send(text);
        }
        void close() override {
            if (auto s = session_.lock()) s->close();
        }

    private:
        std::weak_ptr<WsSession> session_;
    };

    void on_accept(error_code ec) {
        if (ec) return;
        id_ = srv_.hub.connect(std::make_shared<Link>(weak_from_this()));
        connected_ = true;
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, [self = shared_from_this()](error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(error_code ec) {
        if (ec) {
            finish();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        srv_.hub.on_text(id_, text, srv_.now_ms());
        do_read();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(asio::buffer(outq_.front()),
                        [self = shared_from_this()](error_code ec, std::size_t) { self->on_write(ec); });
    }

    void on_write(error_code ec) {
        if (ec) {
            finish();
            return;
        }
        outq_.pop_front();
        if (!outq_.empty()) {
            do_write();
        } else if (closing_) {
            do_close();
        }
    }

    void do_close() {
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](error_code) { self->finish(); });
    }

    void finish() {
        if (finished_) return;
        finished_ = true;
        outq_.clear();
        if (connected_) srv_.hub.disconnect(id_);
    }

    websocket::stream<beast::tcp_stream> ws_;
    Server::Impl& srv_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outq_;
    ConnId id_ = 0;
    bool connected_ = false;
    bool closing_ = false;
    bool finished_ = false;
};

class FramedSession : public std::enable_shared_from_this<FramedSession> {
public:
    FramedSession(tcp::socket socket, Server::Impl& srv) : socket_(std::move(socket)), srv_(srv) {}

    void run() {
        id_ = srv_.hub.connect(std::make_shared<Link>(weak_from_this()));
        do_read();
    }

    void send(const std::string& text) {
        if (closing_ || finished_) return;
        outq_.push_back(frame(text));
        if (outq_.size() == 1) do_write();
    }

    void close() {
        if (closing_ || finished_) return;
        closing_ = true;
        if (outq_.empty()) shutdown();
    }

private:
    class Link final : public Peer {
    public:
        explicit Link(std::weak_ptr<FramedSession> s) : session_(std::move(s)) {}
        void send(const std::string& text) override {
            if (auto s = session_.lock()) s->send(text);
        }
        void close() override {
            if (auto s = session_.lock()) s->close();
        }

    private:
        std::weak_ptr<FramedSession> session_;
    };

    void do_read() {
        socket_.async_read_some(asio::buffer(chunk_), [self = shared_from_this()](error_code ec, std::size_t n) {
            self->on_read(ec, n);
        });
    }

    void on_read(error_code ec, std::size_t n) {
        if (ec) {
            finish();
            return;
        }
        std::vector<std::string> payloads;
        try {
            payloads = decoder_.push(std::string_view(chunk_.data(), n));
        } catch (const FrameError& e) {
            // The stream cannot be resynchronised after a bad header.
            send(encode(msg::Err{"frame_too_large", e.what()}));
            close();
            return;
        }
        for (const std::string& p : payloads) {
            if (finished_) return;
            srv_.hub.on_text(id_, p, srv_.now_ms());
        }
        if (!finished_) do_read();
    }

    void do_write() {
        asio::async_write(socket_, asio::buffer(outq_.front()),
                          [self = shared_from_this()](error_code ec, std::size_t) { self->on_write(ec); });
    }

    void on_write(error_code ec) {
        if (ec) {
            finish();
            return;
        }
        outq_.pop_front();
        if (!outq_.empty()) {
            do_write();
        } else if (closing_) {
            shutdown();
        }
    }

    void shutdown() {
        error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
        finish();
    }

    void finish() {
        if (finished_) return;
        finished_ = true;
        outq_.clear();
        srv_.hub.disconnect(id_);
    }

    tcp::socket socket_;
    Server::Impl& srv_;
    std::array<char, 1 << 14> chunk_{};
    FrameDecoder decoder_;
    std::deque<std::string> outq_;
    ConnId id_ = 0;
    bool closing_ = false;
    bool finished_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, Server::Impl& srv) : stream_(std::move(socket)), srv_(srv) {}

    void run() { do_read(); }

private:
    void do_read() {
        parser_.emplace();
        parser_->body_limit(64 * 1024);
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, *parser_,
                         [self = shared_from_this()](error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(error_code ec) {
        if (ec) {
            error_code ignored;
            stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            return;
        }
        http::request<http::string_body> req = parser_->release();
        const std::string_view path = path_of(std::string_view(req.target().data(), req.target().size()));
        if (websocket::is_upgrade(req)) {
            if (path == "/ws") {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), srv_)->run(std::move(req));
                return;
            }
            send_text(req, http::status::not_found, "text/plain", "no websocket endpoint at this path\n");
            return;
        }
        if (req.method() != http::verb::get) {
            send_text(req, http::status::method_not_allowed, "text/plain", "only GET is supported\n");
            return;
        }
        if (path.starts_with("/manifest/")) {
            const auto id = url_decode(path.substr(10));
            if (!id || *id != srv_.hub.session_id()) {
                send_text(req, http::status::not_found, "text/plain", "unknown session\n");
                return;
            }
            std::string host(req[http::field::host]);
            if (host.empty()) host = srv_.options.host + ":" + std::to_string(srv_.http_acceptor.local_endpoint().port());
            send_text(req, http::status::ok, "application/json", build_manifest(srv_.cfg, srv_.catalog, "http://" + host));
            return;
        }
        if (path.starts_with("/media/")) {
            serve_media(req, path.substr(7));
            return;
        }
        send_text(req, http::status::not_found, "text/plain", "not found\n");
    }

    void serve_media(const http::request<http::string_body>& req, std::string_view encoded_id) {
        const auto id = url_decode(encoded_id);
        std::optional<std::string_view> range;
        const auto range_it = req.find(http::field::range);
        if (range_it != req.end()) range = std::string_view(range_it->value().data(), range_it->value().size());
        const MediaResponse plan = id ? plan_media_response(srv_.catalog, *id, range) : MediaResponse{404, {}, {}, 0, 0};

        if (plan.path.empty()) {
            http::response<http::string_body> res{static_cast<http::status>(plan.status), req.version()};
            for (const auto& [k, v] : plan.headers) res.set(k, v);
            res.set(http::field::access_control_allow_origin, "*");
            res.keep_alive(req.keep_alive());
            res.body() = plan.status == 404 ? "unknown media\n" : "";
            res.prepare_payload();
            write(std::move(res));
            return;
        }
        http::response<FileRangeBody> res{static_cast<http::status>(plan.status), req.version()};
        for (const auto& [k, v] : plan.headers) res.set(k, v);
        res.set(http::field::access_control_allow_origin, "*");
        res.keep_alive(req.keep_alive());
        res.body() = {plan.path, plan.body_offset, plan.body_length};
        res.prepare_payload();
        write(std::move(res));
    }

    void send_text(const http::request<http::string_body>& req, http::status status, std::string_view type, std::string body) {
        http::response<http::string_body> res{status, req.version()};
        res.set(http::field::content_type, std::string(type));
        res.set(http::field::access_control_allow_origin, "*");
        res.keep_alive(req.keep_alive());
        res.body() = std::move(body);
        res.prepare_payload();
        write(std::move(res));
    }

    template <class Body>
    void write(http::response<Body>&& res) {
        auto sp = std::make_shared<http::response<Body>>(std::move(res));
        stream_.expires_after(std::chrono::minutes(10));
        http::async_write(stream_, *sp, [self = shared_from_this(), sp](error_code ec, std::size_t) {
            if (ec || !sp->keep_alive()) {
                error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    Server::Impl& srv_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

void Server::Impl::bind() {
    if (bound) return;
    const auto address = asio::ip::make_address(options.host);
    auto open = [&](tcp::acceptor& acc, std::uint16_t port) {
        const tcp::endpoint ep{address, port};
        acc.open(ep.protocol());
        acc.set_option(asio::socket_base::reuse_address(true));
        acc.bind(ep);
        acc.listen(asio::socket_base::max_listen_connections);
    };
    open(http_acceptor, options.port);
    if (options.tcp_port) {
        tcp_acceptor.emplace(ioc);
        open(*tcp_acceptor, *options.tcp_port);
        accept_tcp();
    }
    accept_http();
    schedule_tick();
    bound = true;
}

void Server::Impl::accept_http() {
    http_acceptor.async_accept([this](error_code ec, tcp::socket socket) {
        if (ec == asio::error::operation_aborted) return;
        if (!ec) {
            socket.set_option(tcp::no_delay(true));
            std::make_shared<HttpSession>(std::move(socket), *this)->run();
        }
        accept_http();
    });
}

void Server::Impl::accept_tcp() {
    tcp_acceptor->async_accept([this](error_code ec, tcp::socket socket) {
        if (ec == asio::error::operation_aborted) return;
        if (!ec) {
            socket.set_option(tcp::no_delay(true));
            std::make_shared<FramedSession>(std::move(socket), *this)->run();
        }
        accept_tcp();
    });
}

void Server::Impl::schedule_tick() {
    ticker.expires_after(std::chrono::milliseconds(std::max<std::int64_t>(1, options.tick_ms)));
    ticker.async_wait([this](error_code ec) {
        if (ec) return;
        hub.advance(now_ms());
        schedule_tick();
    });
}

Server::Server(StudyConfig cfg, MediaCatalog catalog, HubOptions hub_options, LogSink* log, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(catalog), std::move(hub_options), log, std::move(options))) {}

Server::~Server() { stop(); }

void Server::bind() { impl_->bind(); }

void Server::start() {
    impl_->bind();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::run() {
    impl_->bind();
    asio::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
    signals.async_wait([this](error_code, int) { impl_->ioc.stop(); });
    impl_->ioc.run();
}

void Server::stop() {
    impl_->ioc.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint16_t Server::port() const { return impl_->http_acceptor.local_endpoint().port(); }

std::optional<std::uint16_t> Server::tcp_port() const {
    if (!impl_->tcp_acceptor) return std::nullopt;
    return impl_->tcp_acceptor->local_endpoint().port();
}

void Server::with_hub(const std::function<void(Hub&)>& fn) {
    std::promise<void> done;
    asio::post(impl_->ioc, [&] {
        try {
            fn(impl_->hub);
            done.set_value();
        } catch (...) {
            done.set_exception(std::current_exception());
        }
    });
    done.get_future().get();
}

std::int64_t Server::now_ms() const { return impl_->now_ms(); }

// Client -----------------------------------------------------------------------

Endpoint parse_endpoint(std::string_view url) {
    Endpoint ep;
    std::string_view rest;
    if (url.starts_with("ws://")) {
        ep.scheme = Endpoint::Scheme::ws;
        rest = url.substr(5);
    } else if (url.starts_with("tcp://")) {
        ep.scheme = Endpoint::Scheme::tcp;
        rest = url.substr(6);
    } else {
        throw std::invalid_argument("endpoint must start with ws:// or tcp://");
    }
    const auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    if (slash != std::string_view::npos) {
        if (ep.scheme == Endpoint::Scheme::tcp) throw std::invalid_argument("tcp endpoints take no path");
        ep.path = std::string(rest.substr(slash));
    }
    const auto colon = authority.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == authority.size()) {
        throw std::invalid_argument("endpoint needs host:port");
    }
    ep.host = std::string(authority.substr(0, colon));
    ep.port = std::string(authority.substr(colon + 1));
    for (char c : ep.port) {
        if (c < '0' || c > '9') throw std::invalid_argument("endpoint port must be numeric");
    }
    return ep;
}

struct TextClient::Impl {
    asio::io_context ioc{1};
    Endpoint endpoint;
    std::optional<websocket::stream<beast::tcp_stream>> ws;
    std::optional<tcp::socket> raw;
    beast::flat_buffer ws_buffer;
    std::array<char, 1 << 14> chunk{};
    FrameDecoder decoder;
    std::deque<std::string> outq;
    bool closing = false;
    std::thread thread;

    mutable std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> inbox;
    bool remote_closed = false;

    void deliver(std::string text) {
        {
            std::lock_guard lock(mu);
            inbox.push_back(std::move(text));
        }
        cv.notify_all();
    }

    void mark_closed() {
        {
            std::lock_guard lock(mu);
            remote_closed = true;
        }
        cv.notify_all();
    }

    void read_loop() {
        if (ws) {
            ws->async_read(ws_buffer, [this](error_code ec, std::size_t) {
                if (ec) {
                    mark_closed();
                    return;
                }
                deliver(beast::buffers_to_string(ws_buffer.data()));
                ws_buffer.consume(ws_buffer.size());
                read_loop();
            });
        } else {
            raw->async_read_some(asio::buffer(chunk), [this](error_code ec, std::size_t n) {
                if (ec) {
                    mark_closed();
                    return;
                }
                try {
                    for (std::string& p : decoder.push(std::string_view(chunk.data(), n))) deliver(std::move(p));
                } catch (const FrameError&) {
                    mark_closed();
                    return;
                }
                read_loop();
            });
        }
    }

    void write_next() {
        auto on_write = [this](error_code ec, std::size_t) {
            if (ec) {
                mark_closed();
                return;
            }
            outq.pop_front();
            if (!outq.empty()) {
                write_next();
            } else if (closing) {
                shutdown();
            }
        };
        if (ws) {
            ws->text(true);
            ws->async_write(asio::buffer(outq.front()), on_write);
        } else {
            asio::async_write(*raw, asio::buffer(outq.front()), on_write);
        }
    }

    void shutdown() {
        if (ws) {
            ws->async_close(websocket::close_code::normal, [](error_code) {});
        } else {
            error_code ignored;
            raw->shutdown(tcp::socket::shutdown_both, ignored);
            raw->close(ignored);
        }
    }
};

TextClient::TextClient(const Endpoint& endpoint) : impl_(std::make_unique<Impl>()) {
    impl_->endpoint = endpoint;
    tcp::resolver resolver(impl_->ioc);
    const auto results = resolver.resolve(endpoint.host, endpoint.port);
    if (endpoint.scheme == Endpoint::Scheme::ws) {
        impl_->ws.emplace(impl_->ioc);
        beast::get_lowest_layer(*impl_->ws).connect(results);
        beast::get_lowest_layer(*impl_->ws).socket().set_option(tcp::no_delay(true));
        impl_->ws->read_message_max(kMaxFramePayload);
        impl_->ws->handshake(endpoint.host + ":" + endpoint.port, endpoint.path);
    } else {
        impl_->raw.emplace(impl_->ioc);
        asio::connect(*impl_->raw, results);
        impl_->raw->set_option(tcp::no_delay(true));
    }
    impl_->read_loop();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

TextClient::~TextClient() {
    close();
    {
        std::unique_lock lock(impl_->mu);
        impl_->cv.wait_for(lock, std::chrono::milliseconds(500), [&] { return impl_->remote_closed; });
    }
    impl_->ioc.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void TextClient::send(std::string text) {
    asio::post(impl_->ioc, [impl = impl_.get(), text = std::move(text)]() mutable {
        if (impl->closing) return;
        impl->outq.push_back(impl->ws ? std::move(text) : frame(text));
        if (impl->outq.size() == 1) impl->write_next();
    });
}

std::optional<std::string> TextClient::receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait_for(lock, timeout, [&] { return !impl_->inbox.empty() || impl_->remote_closed; });
    if (impl_->inbox.empty()) return std::nullopt;
    std::string s = std::move(impl_->inbox.front());
    impl_->inbox.pop_front();
    return s;
}

bool TextClient::closed() const {
    std::lock_guard lock(impl_->mu);
    return impl_->remote_closed && impl_->inbox.empty();
}

void TextClient::close() {
    asio::post(impl_->ioc, [impl = impl_.get()] {
        if (impl->closing) return;
        impl->closing = true;
        if (impl->outq.empty()) impl->shutdown();
    });
}

SimReport run_sim(const Endpoint& endpoint, const SimConfig& config, std::int64_t duration_ms) {
    TextClient client(endpoint);
    SimClient sim(config, [&](std::string text) { client.send(std::move(text)); });
    const auto t0 = std::chrono::steady_clock::now();
    auto now = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    };
    sim.start(now());
    bool lost = false;
    while (now() < duration_ms && !sim.done()) {
        if (auto m = client.receive(std::chrono::milliseconds(1))) {
            sim.on_text(*m, now());
            while (auto more = client.receive(std::chrono::milliseconds(0))) sim.on_text(*more, now());
        }
        sim.step(now());
        if (client.closed()) {
            lost = true;
            break;
        }
    }
    SimReport report = sim.report();
    if (lost && !report.session_completed && !report.error) report.error = "connection closed by server";
    return report;
}

}  // namespace study360::net
