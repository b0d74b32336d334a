#include "doctest.h"
#include "message_gen.hpp"
#include "support.hpp"

#include <chrono>

#include "study360/protocol.hpp"

using namespace study360;
using nlohmann::json;
using study360::test::MessageGen;

namespace {

ProtocolError decode_error(std::string_view text) {
    try {
        decode(text);
    } catch (const ProtocolError& e) {
        return e;
    }
    FAIL("expected a ProtocolError for " << text);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("encode produces the documented JSON shape") {
    const json pose = json::parse(encode(msg::Pose{10, {1.0, 0.0, 0.0, 0.0}}));
    CHECK(pose == json::parse(R"({"type":"pose","v":1,"t_ms":10,"q":[1.0,0.0,0.0,0.0]})"));
    CHECK(json::parse(encode(msg::Ping{100})) == json::parse(R"({"type":"ping","v":1,"t0_ms":100})"));
    const std::string line = encode(msg::Err{"x", "multi\nline"});
    CHECK(line.find('\n') == std::string::npos);

    const json cmd = json::parse(encode(msg::Cmd{cmd::Pause{}, std::nullopt}));
    CHECK(cmd["type"] == "command");
    CHECK(cmd["action"] == "pause");

    const std::vector<std::pair<Message, std::string>> tags{
        {msg::Hello{}, "hello"},       {msg::Welcome{}, "welcome"}, {msg::Cmd{}, "command"},
        {msg::State{}, "state"},       {msg::CueMsg{}, "cue"},      {msg::CueAck{}, "cue_ack"},
        {msg::Pose{0, {1, 0, 0, 0}}, "pose"}, {msg::Biometric{}, "biometric"}, {msg::Ping{}, "ping"},
        {msg::Pong{}, "pong"},         {msg::Err{}, "error"}};
    for (const auto& [m, tag] : tags) {
        const json j = json::parse(encode(m));
        CHECK(j["type"] == tag);
        CHECK(j["v"] == 1);
        CHECK(type_name(m) == tag);
    }
}

TEST_CASE("decode accepts documents and ignores unknown keys") {
    CHECK(decode(R"({"type":"pose","v":1,"t_ms":10,"q":[1,0,0,0]})") == Message{msg::Pose{10, {1, 0, 0, 0}}});
    CHECK(decode(R"({"type":"ping","v":1,"t0_ms":5,"extra":{"nested":[1,2]}})") == Message{msg::Ping{5}});
    CHECK(decode(R"({"type":"command","v":1,"action":"seek","to_ms":1500})") == Message{msg::Cmd{cmd::Seek{1500}, std::nullopt}});
}

TEST_CASE("decode errors") {
    ProtocolError e = decode_error(R"({"type":"warp","v":1})");
    CHECK(e.kind() == ProtocolError::Kind::unknown_type);
    CHECK(e.detail() == "warp");

    e = decode_error(R"({"type":"pose","v":2,"t_ms":10,"q":[1,0,0,0]})");
    CHECK(e.kind() == ProtocolError::Kind::bad_version);
    CHECK(e.detail() == "2");

    e = decode_error(R"({"type":"pose","v":1,"q":[1,0,0,0]})");
    CHECK(e.kind() == ProtocolError::Kind::missing_field);
    CHECK(e.detail() == "t_ms");

    e = decode_error(R"({"type":"pose","v":1})");
    CHECK(e.kind() == ProtocolError::Kind::missing_field);

    CHECK(decode_error("not json").kind() == ProtocolError::Kind::bad_json);
    CHECK(decode_error("[1,2]").kind() == ProtocolError::Kind::bad_json);
    CHECK(decode_error(R"({"type":"pose","v":1,"t_ms":"x","q":[1,0,0,0]})").kind() == ProtocolError::Kind::invalid_field);
    CHECK(decode_error(R"({"type":"pose","v":1,"t_ms":1,"q":[0,0,0,0]})").kind() == ProtocolError::Kind::invalid_field);
    CHECK(decode_error(R"({"type":"hello","v":1,"role":"admin","protocol_version":1})").kind() ==
          ProtocolError::Kind::invalid_field);
    CHECK(decode_error(R"({"type":"hello","v":1,"role":"headset","protocol_version":3})").kind() ==
          ProtocolError::Kind::bad_version);
    CHECK(decode_error(R"({"type":"command","v":1,"action":"dance"})").kind() == ProtocolError::Kind::invalid_field);
}

TEST_CASE("non-unit quaternions are renormalised on decode") {
    const auto pose = std::get<msg::Pose>(decode(R"({"type":"pose","v":1,"t_ms":0,"q":[2,0,0,0]})"));
    CHECK(pose.q == Quat{1, 0, 0, 0});
    const auto skewed = std::get<msg::Pose>(decode(R"({"type":"pose","v":1,"t_ms":0,"q":[0.6,0.8,0.1,0]})"));
    CHECK(std::abs(quat_norm(skewed.q) - 1.0) <= 1e-12);
    // Within tolerance the values pass through untouched.
    const auto near = std::get<msg::Pose>(decode(R"({"type":"pose","v":1,"t_ms":0,"q":[1.0000001,0,0,0]})"));
    CHECK(near.q.w == 1.0000001);
}

TEST_CASE("round trip over generated messages") {
    MessageGen gen(42);
    for (int i = 0; i < 20000; ++i) {
        const Message m = gen.next();
        const std::string text = encode(m);
        const Message back = decode(text);
        REQUIRE_MESSAGE(back == m, text);
    }
}

TEST_CASE("decode never fails with anything but ProtocolError") {
    std::mt19937_64 rng(1234);
    MessageGen gen(77);
    const auto start = std::chrono::steady_clock::now();
    int rejected = 0;
    for (int i = 0; i < 100000; ++i) {
        std::string input;
        if (i % 2 == 0) {
            input.resize(rng() % 64);
            for (char& c : input) c = static_cast<char>(rng() & 0xFF);
        } else {
            // Mutate a valid message: flip, drop or duplicate bytes.
            input = encode(gen.next());
            const int edits = 1 + static_cast<int>(rng() % 4);
            for (int k = 0; k < edits && !input.empty(); ++k) {
                const std::size_t pos = rng() % input.size();
                switch (rng() % 3) {
                    case 0: input[pos] = static_cast<char>(rng() & 0xFF); break;
                    case 1: input.erase(pos, 1 + rng() % 4); break;
                    default: input.insert(pos, input.substr(pos, 1 + rng() % 8)); break;
                }
            }
        }
        try {
            decode(input);
        } catch (const ProtocolError&) {
            ++rejected;
        }
    }
    CHECK(rejected > 50000);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(20));
}

TEST_CASE("framing") {
    const std::string f = frame("{}");
    CHECK(f == std::string("\x00\x00\x00\x02{}", 6));
    const Unframed u = unframe(f);
    CHECK(u.payload == "{}");
    CHECK(u.consumed == 6);

    try {
        unframe(std::string("\x00\x00\x00\x14hello", 9));
        FAIL("expected truncated");
    } catch (const FrameError& e) {
        CHECK(e.kind() == FrameError::Kind::truncated);
    }
    try {
        unframe(std::string("\x01\x00\x00\x01", 4));
        FAIL("expected oversize");
    } catch (const FrameError& e) {
        CHECK(e.kind() == FrameError::Kind::oversize);
    }
    CHECK_THROWS_AS(frame(std::string(kMaxFramePayload + 1, 'x')), FrameError);
    CHECK(unframe(frame(std::string(kMaxFramePayload, 'x'))).payload.size() == kMaxFramePayload);
    CHECK(unframe(frame("")).payload.empty());
}

TEST_CASE("frame decoder splits concatenated frames at any chunk boundary") {
    std::mt19937_64 rng(9);
    MessageGen gen(10);
    for (int round = 0; round < 200; ++round) {
        std::vector<std::string> payloads;
        std::string stream;
        const int n = 1 + static_cast<int>(rng() % 20);
        for (int i = 0; i < n; ++i) {
            payloads.push_back(rng() % 10 == 0 ? std::string() : encode(gen.next()));
            stream += frame(payloads.back());
        }
        FrameDecoder dec;
        std::vector<std::string> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            const std::size_t len = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 40);
            for (std::string& p : dec.push(std::string_view(stream).substr(pos, len))) got.push_back(std::move(p));
            pos += len;
        }
        CHECK(got == payloads);
        CHECK(dec.buffered() == 0);
    }
    FrameDecoder bad;
    CHECK_THROWS_AS(bad.push(std::string("\xFF\xFF", 2) + std::string("\xFF\xFF", 2)), FrameError);
}

TEST_CASE("clock offset estimate") {
    CHECK(estimate_offset(100, 1050, 140) == ClockOffset{930.0, 40});
    CHECK(estimate_offset(100, 100, 100) == ClockOffset{0.0, 0});

    // Two clocks with known skew and equal one-way delays.
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10000; ++i) {
        const std::int64_t skew = static_cast<std::int64_t>(rng() % 2'000'000) - 1'000'000;  // server - client
        const std::int64_t delay = static_cast<std::int64_t>(rng() % 500);
        const std::int64_t t0 = static_cast<std::int64_t>(rng() % 1'000'000'000);
        const std::int64_t server = t0 + skew + delay;
        const std::int64_t t1 = t0 + 2 * delay;
        const ClockOffset off = estimate_offset(t0, server, t1);
        REQUIRE(off.offset_ms == static_cast<double>(skew));
        REQUIRE(off.rtt_ms == 2 * delay);
    }
}
