// Acceptance run: one PASS/FAIL line per criterion with the measured values
// and pinned tolerances. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "httplib.h"
#include "message_gen.hpp"
#include "scheduler_model.hpp"
#include "study360/accessibility.hpp"
#include "study360/gaze.hpp"
#include "study360/loopback.hpp"
#include "study360/net.hpp"
#include "support.hpp"

using namespace study360;
using namespace study360::test;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& criterion) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = criterion();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome scheduler_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240501);
    int mismatches = 0;
    std::size_t events = 0;
    for (int round = 0; round < 500; ++round) {
        const StudyConfig cfg = canonicalize(random_study(rng, 100));
        const std::vector<Op> ops = random_schedule(rng, cfg);
        const DriveResult ref = reference(cfg, ops);
        const DriveResult real = drive(cfg, ops, true);
        if (real.log != ref.log || real.accepted != ref.accepted) ++mismatches;
        events += ref.log.size();
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "configs=500 max_cues=100 events=" << events << " mismatches=" << mismatches << " limit=30s";
    return {mismatches == 0 && secs < 30.0, d.str()};
}

Outcome exactly_once() {
    std::mt19937_64 rng(99);
    int duplicates = 0;
    for (int round = 0; round < 1000; ++round) {
        const StudyConfig cfg = canonicalize(random_study(rng, 60));
        const DriveResult r = drive(cfg, random_schedule(rng, cfg), rng() % 2 == 0);
        std::map<std::string, int> seen;
        for (const auto& [kind, id] : r.log) {
            if (++seen[id] > 1) ++duplicates;
        }
    }
    return {duplicates == 0, "interleavings=1000 duplicate_fire_or_skip=" + std::to_string(duplicates)};
}

Outcome protocol_roundtrip_and_fuzz() {
    const auto t0 = Clock::now();
    MessageGen gen(42);
    int roundtrip_failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const Message m = gen.next();
        if (!(decode(encode(m)) == m)) ++roundtrip_failures;
    }
    std::mt19937_64 rng(1234);
    int foreign_exceptions = 0;
    for (int i = 0; i < 100000; ++i) {
        std::string bytes(rng() % 96, '\0');
        for (char& c : bytes) c = static_cast<char>(rng() & 0xFF);
        try {
            decode(bytes);
        } catch (const ProtocolError&) {
        } catch (...) {
            ++foreign_exceptions;
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "roundtrip=10000 failures=" << roundtrip_failures << " fuzz=100000 non_protocol_errors=" << foreign_exceptions
      << " limit=20s";
    return {roundtrip_failures == 0 && foreign_exceptions == 0 && secs < 20.0, d.str()};
}

Outcome range_streaming() {
    // Case table.
    const std::vector<std::pair<std::string, RangeResult>> table{
        {"bytes=0-499", ByteRange{0, 499}},
        {"bytes=-500", ByteRange{500, 999}},
        {"bytes=900-2000", ByteRange{900, 999}},
        {"bytes=1000-", RangeOutcome::unsatisfiable},
    };
    int table_failures = 0;
    for (const auto& [header, want] : table) {
        if (!(parse_range(header, 1000) == want)) ++table_failures;
    }

    // 1 MiB over real HTTP in 64 random contiguous ranges.
    const std::filesystem::path dir = scratch_dir("acceptance_media");
    std::mt19937_64 rng(7);
    std::string bytes(1 << 20, '\0');
    for (char& c : bytes) c = static_cast<char>(rng() & 0xFF);
    std::ofstream(dir / "video.mp4", std::ios::binary) << bytes;
    net::Server server(make_study(1000, {}), MediaCatalog::load(dir), HubOptions{}, nullptr, net::ServerOptions{});
    server.start();
    httplib::Client http("127.0.0.1", server.port());
    std::vector<std::int64_t> cuts{0, 1 << 20};
    while (cuts.size() < 65) {
        const std::int64_t c = 1 + static_cast<std::int64_t>(rng() % ((1 << 20) - 1));
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::string joined;
    int bad_status = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        auto res = http.Get("/media/video.mp4", {{"Range", "bytes=" + std::to_string(cuts[i]) + "-" + std::to_string(cuts[i + 1] - 1)}});
        if (!res || res->status != 206) {
            ++bad_status;
            continue;
        }
        joined += res->body;
    }
    auto unsat = http.Get("/media/video.mp4", {{"Range", "bytes=2000000-"}});
    const bool unsat_ok = unsat && unsat->status == 416 && unsat->get_header_value("Content-Range") == "bytes */1048576";
    server.stop();
    std::filesystem::remove_all(dir);
    const bool identical = joined == bytes;
    std::ostringstream d;
    d << "table_failures=" << table_failures << " ranges=64 non_206=" << bad_status
      << " reassembled_identical=" << (identical ? "yes" : "no") << " http_416=" << (unsat_ok ? "yes" : "no");
    return {table_failures == 0 && bad_status == 0 && identical && unsat_ok, d.str()};
}

Vec3 rodrigues_forward(Vec3 axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
    const double x = axis.x, y = axis.y, z = axis.z;
    // Third column of the rotation matrix, negated: R * (0, 0, -1).
    return {-(t * x * z + s * y), -(t * y * z - s * x), -(t * z * z + c)};
}

Direction oracle_direction(const Vec3& f) {
    const double pitch = std::asin(std::clamp(f.y, -1.0, 1.0)) * 180.0 / M_PI;
    if (std::abs(std::abs(pitch) - 90.0) < 1e-9) return {0.0, pitch};
    return {wrap_yaw_deg(std::atan2(f.x, -f.z) * 180.0 / M_PI), pitch};
}

Outcome gaze_math() {
    const EquirectPoint c = direction_to_equirect(quat_to_direction({1, 0, 0, 0}), 3840, 1920);
    const bool centre = c.u == 1920.0 && c.v == 960.0;

    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> yaw(-180.0, 180.0), pitch(-89.0, 89.0);
    double worst_roundtrip = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Direction d{yaw(rng), pitch(rng)};
        const Direction back = equirect_to_direction(direction_to_equirect(d, 3840, 1920), 3840, 1920);
        worst_roundtrip = std::max({worst_roundtrip, std::abs(wrap_yaw_deg(back.yaw_deg - d.yaw_deg)),
                                    std::abs(back.pitch_deg - d.pitch_deg)});
    }

    int metric_failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const Direction a = random_direction(rng), b = random_direction(rng), e = random_direction(rng);
        const double ab = angular_distance(a, b);
        if (ab < 0 || ab > 180 || ab != angular_distance(b, a) || angular_distance(a, a) != 0.0 ||
            angular_distance(a, e) > ab + angular_distance(b, e) + 1e-9 || (!(a == b) && ab == 0.0)) {
            ++metric_failures;
        }
    }

    const double h = std::sqrt(2.0) / 2.0;
    const Direction y = quat_to_direction({h, 0, h, 0});
    const Direction oy = oracle_direction(rodrigues_forward({0, 1, 0}, M_PI / 2));
    const Direction x = quat_to_direction({h, h, 0, 0});
    const Direction ox = oracle_direction(rodrigues_forward({1, 0, 0}, M_PI / 2));
    const double quat_err = std::max({std::abs(y.yaw_deg - oy.yaw_deg), std::abs(y.pitch_deg - oy.pitch_deg),
                                      std::abs(x.yaw_deg - ox.yaw_deg), std::abs(x.pitch_deg - ox.pitch_deg),
                                      std::abs(y.yaw_deg + 90.0), std::abs(x.pitch_deg - 90.0)});
    std::ostringstream d;
    d << "identity_centre=" << (centre ? "exact" : "off") << " roundtrip_max_deg=" << worst_roundtrip
      << " (tol 1e-9) metric_failures=" << metric_failures << "/10000 quat_oracle_max_err=" << quat_err << " (tol 1e-9)";
    return {centre && worst_roundtrip <= 1e-9 && metric_failures == 0 && quat_err <= 1e-9, d.str()};
}

Outcome dwell_conservation() {
    std::mt19937_64 rng(16);
    int dwell_failures = 0, heatmap_failures = 0;
    for (int round = 0; round < 500; ++round) {
        GazeTrace trace;
        std::int64_t t = static_cast<std::int64_t>(rng() % 1000);
        const int n = 1 + static_cast<int>(rng() % 300);
        for (int i = 0; i < n; ++i) {
            trace.push_back({t, direction_to_quat(random_direction(rng))});
            t += 1 + static_cast<std::int64_t>(rng() % 50);
        }
        // Northern and southern hemispheres cover the sphere and share only
        // the equator, which is counted once.
        const std::vector<Aoi> split{{"upper", {0, 45}, 360, 90}, {"lower", {0, -45}, 360, 90}};
        const auto d = dwell_times(trace, split);
        std::int64_t equator = 0;
        const auto dirs = trace_directions(trace);
        for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
            if (dirs[i].pitch_deg == 0.0) equator += trace[i + 1].t_ms - trace[i].t_ms;
        }
        if (d.at("upper") + d.at("lower") - equator != trace.back().t_ms - trace.front().t_ms) ++dwell_failures;
        if (heatmap(trace, 36, 18).total() != trace.size()) ++heatmap_failures;
    }
    return {dwell_failures == 0 && heatmap_failures == 0,
            "traces=500 dwell_sum_mismatches=" + std::to_string(dwell_failures) +
                " heatmap_count_mismatches=" + std::to_string(heatmap_failures)};
}

Outcome end_to_end() {
    const auto t0 = Clock::now();
    const StudyConfig cfg = make_study(4000, {text_cue("side", 1000, 2000, {90, 0})});
    HubOptions hub_options;
    SimConfig sim;
    sim.pose_rate_hz = 30;
    sim.behavior = SeekBehavior{90.0, 0};
    sim.half_fov_deg = 45.0;
    LoopbackOptions opts;
    opts.duration_ms = 8000;
    opts.researcher_commands = {{0, cmd::Start{}}};
    const LoopbackResult run = run_loopback(cfg, hub_options, sim, opts);

    const std::filesystem::path dir = scratch_dir("acceptance_e2e");
    {
        JsonlLogWriter w(dir / "session.jsonl");
        for (const LogRecord& r : run.log) w.write(r);
    }
    if (run.report.alignment_events.size() != 1) return {false, "alignment events: " + std::to_string(run.report.alignment_events.size())};
    const AlignmentEvent& e = run.report.alignment_events[0];
    const std::int64_t latency = e.aligned_ms - e.cue_received_ms;
    const double period = 1000.0 / sim.pose_rate_hz;

    const AnalysisReport analysis = analyze(dir / "session.jsonl", AnalyzeOptions{});
    const auto j = nlohmann::json::parse(analysis.report_json);
    const Replay replay = replay_trace(dir / "session.jsonl");
    std::int64_t direct = -1;
    for (const ReplayedCue& f : replay.fired) {
        if (f.cue.id == "side") direct = cue_visibility(replay.trace, rebased_to_server_time(f), 45.0);
    }
    const std::int64_t reported = j["cue_visibility_ms"].value("side", std::int64_t{-2});
    std::filesystem::remove_all(dir);
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "alignment_latency_ms=" << latency << " expected=500+[0," << period << "] visible_ms analyze=" << reported
      << " direct=" << direct << " limit=10s";
    return {latency >= 500 && latency <= 500 + period && reported == direct && direct > 0 && secs < 10.0, d.str()};
}

Outcome constant_power() {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> gain(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double b = gain(rng);
        const StereoGains s = spatial_gains(normalized({g(rng), g(rng), g(rng), g(rng)}), random_direction(rng), b);
        worst = std::max(worst, std::abs(s.left * s.left + s.right * s.right - b * b));
    }
    std::uniform_int_distribution<int> sample(-32768, 32767), coef(-4, 4);
    int linearity_failures = 0;
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 1 + rng() % 500;
        std::vector<float> l1(n), r1(n), l2(n), r2(n), lc(n), rc(n);
        const float a = static_cast<float>(coef(rng)), c = static_cast<float>(coef(rng));
        for (std::size_t i = 0; i < n; ++i) {
            l1[i] = static_cast<float>(sample(rng));
            r1[i] = static_cast<float>(sample(rng));
            l2[i] = static_cast<float>(sample(rng));
            r2[i] = static_cast<float>(sample(rng));
            lc[i] = a * l1[i] + c * l2[i];
            rc[i] = a * r1[i] + c * r2[i];
        }
        const auto m1 = downmix_mono(l1, r1), m2 = downmix_mono(l2, r2), mc = downmix_mono(lc, rc);
        for (std::size_t i = 0; i < n; ++i) {
            if (mc[i] != a * m1[i] + c * m2[i]) ++linearity_failures;
        }
    }
    std::ostringstream d;
    d << "poses=10000 max_power_error=" << worst << " (tol 1e-9) downmix_linearity_failures=" << linearity_failures;
    return {worst <= 1e-9 && linearity_failures == 0, d.str()};
}

}  // namespace

int main() {
    report("scheduler-oracle-equivalence", scheduler_equivalence);
    report("exactly-once-firing", exactly_once);
    report("protocol-roundtrip-and-fuzz", protocol_roundtrip_and_fuzz);
    report("range-streaming-bit-exact", range_streaming);
    report("gaze-math", gaze_math);
    report("dwell-conservation", dwell_conservation);
    report("end-to-end-seek-alignment", end_to_end);
    report("constant-power-audio", constant_power);
    return failures == 0 ? 0 : 1;
}
