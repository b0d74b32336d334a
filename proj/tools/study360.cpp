// study360: serve a study session, validate study files, run a simulated
// headset and analyse session logs.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "study360/headset_sim.hpp"
#include "study360/net.hpp"
#include "study360/orchestrator.hpp"

namespace {

using namespace study360;

// Bad user-supplied input; exits with code 2 rather than 1.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

// Exit codes: 0 ok, 1 runtime error, 2 invalid input.
int load_study(const std::string& path, StudyConfig& out) {
    try {
        out = parse_study(read_file(path));
    } catch (const std::exception& e) {
        std::cerr << path << ": " << e.what() << '\n';
        return 2;
    }
    const auto violations = validate_study(out);
    for (const Violation& v : violations) std::cerr << to_string(v) << '\n';
    return violations.empty() ? 0 : 2;
}

int run_validate(const std::string& config_path) {
    StudyConfig cfg;
    if (int rc = load_study(config_path, cfg); rc != 0) return rc;
    std::cout << config_path << ": ok (" << cfg.cues.size() << " cues, " << cfg.audio_tracks.size() << " audio tracks)\n";
    return 0;
}

struct ServeArgs {
    std::string config;
    std::string media_dir;
    std::string host = "127.0.0.1";
    std::uint16_t port = 8360;
    std::optional<std::uint16_t> tcp_port;
    std::string log = "session.jsonl";
    std::string rules;
    std::string session_id = "session";
};

int run_serve(const ServeArgs& a) {
    StudyConfig cfg;
    if (int rc = load_study(a.config, cfg); rc != 0) return rc;
    HubOptions hub_options;
    hub_options.session_id = a.session_id;
    if (!a.rules.empty()) hub_options.rules = parse_rules(read_file(a.rules));

    const std::filesystem::path log_path = resolve_log_path(a.log);
    JsonlLogWriter log(log_path);
    net::ServerOptions options;
    options.host = a.host;
    options.port = a.port;
    options.tcp_port = a.tcp_port;
    net::Server server(std::move(cfg), MediaCatalog::load(a.media_dir), std::move(hub_options), &log, options);
    server.bind();
    std::cout << "session " << a.session_id << " listening on ws://" << a.host << ':' << server.port() << "/ws";
    if (auto tp = server.tcp_port()) std::cout << " and tcp://" << a.host << ':' << *tp;
    std::cout << "\nmanifest: http://" << a.host << ':' << server.port() << "/manifest/" << a.session_id << "\nlog: "
              << log_path.string() << std::endl;
    server.run();
    return 0;
}

struct SimulateArgs {
    std::string endpoint;
    std::string script;
    bool seek = false;
    int rate = 30;
    std::int64_t duration_ms = 60'000;
    double speed = 90.0;
    std::int64_t latency_ms = 0;
    double half_fov = 45.0;
    std::string session_id;
};

int run_simulate(const SimulateArgs& a) {
    SimConfig cfg;
    cfg.pose_rate_hz = a.rate;
    cfg.half_fov_deg = a.half_fov;
    if (!a.session_id.empty()) cfg.session_id = a.session_id;
    if (!a.script.empty()) {
        cfg.behavior = ScriptedBehavior{parse_motion_script(read_file(a.script))};
    } else {
        cfg.behavior = SeekBehavior{a.speed, a.latency_ms};
    }
    cfg.validate();
    const SimReport report = net::run_sim(net::parse_endpoint(a.endpoint), cfg, a.duration_ms);
    std::cout << report.to_json().dump(2) << std::endl;
    return report.error ? 1 : 0;
}

struct AnalyzeArgs {
    std::string log;
    std::string aois;
    std::string grid = "36x18";
    double half_fov = 45.0;
    std::string out_dir = ".";
};

int run_analyze(const AnalyzeArgs& a) {
    AnalyzeOptions opts;
    opts.half_fov_deg = a.half_fov;
    const auto x = a.grid.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument("");
        opts.grid_cols = std::stoi(a.grid.substr(0, x));
        opts.grid_rows = std::stoi(a.grid.substr(x + 1));
    } catch (const std::exception&) {
        std::cerr << "--grid must look like 36x18\n";
        return 2;
    }
    if (opts.grid_cols <= 0 || opts.grid_rows <= 0) {
        std::cerr << "--grid dimensions must be positive\n";
        return 2;
    }
    if (!a.aois.empty()) opts.aois = parse_aois(read_file(a.aois));
    if (!std::filesystem::is_regular_file(a.log)) throw InputError("cannot read " + a.log);
    const Replay replay = replay_trace(a.log);
    const AnalysisReport report = analyze(replay, opts);
    const std::filesystem::path out(a.out_dir);
    std::filesystem::create_directories(out);
    write_file(out / "report.json", report.report_json);
    write_file(out / "heatmap.pgm", report.heatmap_pgm);
    if (replay.corrupt_lines > 0) std::cerr << "skipped " << replay.corrupt_lines << " corrupt log lines\n";
    std::cout << "wrote " << (out / "report.json").string() << " and " << (out / "heatmap.pgm").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"study360: 360-degree video study sessions"};
    app.require_subcommand(1);

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a study file");
    validate->add_option("--config", validate_config, "Study file (JSON)")->required();

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the session orchestrator");
    serve->add_option("--config", serve_args.config, "Study file (JSON)")->required();
    serve->add_option("--media-dir", serve_args.media_dir, "Directory holding the media files")->required();
    serve->add_option("--host", serve_args.host, "Listen address");
    serve->add_option("--port", serve_args.port, "HTTP/WebSocket port");
    serve->add_option("--tcp-port", serve_args.tcp_port, "Optional raw TCP port (length-prefixed frames)");
    serve->add_option("--log", serve_args.log, "Event log (JSONL); STUDY360_LOG_DIR overrides the directory");
    serve->add_option("--rules", serve_args.rules, "Biometric rules (JSON)");
    serve->add_option("--session-id", serve_args.session_id, "Session id");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Run a simulated headset against a server");
    simulate->add_option("--endpoint", sim_args.endpoint, "ws://host:port/ws or tcp://host:port")->required();
    auto* script_opt = simulate->add_option("--script", sim_args.script, "Motion script: [[t_ms, yaw, pitch], ...]");
    auto* seek_flag = simulate->add_flag("--seek", sim_args.seek, "Turn toward each cue anchor");
    script_opt->excludes(seek_flag);
    simulate->add_option("--rate", sim_args.rate, "Pose rate in Hz")->check(CLI::Range(1, 90));
    simulate->add_option("--duration", sim_args.duration_ms, "Run time in ms");
    simulate->add_option("--speed", sim_args.speed, "Seek speed in deg/s");
    simulate->add_option("--latency", sim_args.latency_ms, "Reaction latency in ms");
    simulate->add_option("--half-fov", sim_args.half_fov, "Alignment threshold in degrees");
    simulate->add_option("--session-id", sim_args.session_id, "Session id to join");

    AnalyzeArgs analyze_args;
    auto* analyze_cmd = app.add_subcommand("analyze", "Replay a session log into gaze metrics");
    analyze_cmd->add_option("--log", analyze_args.log, "Event log (JSONL)")->required();
    analyze_cmd->add_option("--aois", analyze_args.aois, "Areas of interest (JSON)");
    analyze_cmd->add_option("--grid", analyze_args.grid, "Heatmap grid, COLSxROWS");
    analyze_cmd->add_option("--half-fov", analyze_args.half_fov, "Cue visibility threshold in degrees");
    analyze_cmd->add_option("--out-dir", analyze_args.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version requests exit 0; usage errors are invalid input.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*validate) return run_validate(validate_config);
        if (*serve) return run_serve(serve_args);
        if (*simulate) return run_simulate(sim_args);
        if (*analyze_cmd) return run_analyze(analyze_args);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const MissingMedia& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
