#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "study360/orchestrator.hpp"

namespace study360 {

using nlohmann::json;

Replay replay_lines(std::istream& in) {
    Replay r;
    std::set<std::string> fired_ids;
    std::set<std::string> skipped_ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        LogRecord rec;
        try {
            rec = decode_log_record(line);
        } catch (const ProtocolError&) {
            ++r.corrupt_lines;
            continue;
        }
        const bool from_headset = rec.direction == LogDirection::in && rec.peer_role == Role::headset;
        const bool from_researcher = rec.direction == LogDirection::in && rec.peer_role == Role::researcher;

        if (const auto* p = std::get_if<msg::Pose>(&rec.msg); p && from_headset) {
            r.trace.push_back({p->t_ms, p->q});
        } else if (const auto* b = std::get_if<msg::Biometric>(&rec.msg); b && from_headset) {
            r.biometrics.push_back({b->t_ms, b->pulse_bpm});
        } else if (const auto* c = std::get_if<msg::Cmd>(&rec.msg)) {
            if (from_researcher) {
                r.commands.push_back({rec.t_recv_ms, c->command, c->origin});
            } else if (rec.direction == LogDirection::out && c->origin) {
                // Server-issued commands are broadcast to every peer; keep one copy.
                ReplayedCommand rc{rec.t_recv_ms, c->command, c->origin};
                const bool dup = std::any_of(r.commands.rbegin(), r.commands.rend(), [&](const ReplayedCommand& x) {
                    return x.t_ms == rc.t_ms && x.origin == rc.origin && x.command == rc.command;
                });
                if (!dup) r.commands.push_back(std::move(rc));
            }
        } else if (const auto* cue = std::get_if<msg::CueMsg>(&rec.msg); cue && rec.direction == LogDirection::out) {
            if (fired_ids.insert(cue->cue.id).second) {
                r.fired.push_back({cue->cue, cue->position_ms.value_or(cue->cue.at_ms), rec.t_recv_ms});
            }
        } else if (const auto* st = std::get_if<msg::State>(&rec.msg); st && rec.direction == LogDirection::out) {
            for (const std::string& id : st->skipped) {
                if (skipped_ids.insert(id).second) r.skipped.push_back(id);
            }
        }
    }
    std::stable_sort(r.trace.begin(), r.trace.end(),
                     [](const GazeSample& a, const GazeSample& b) { return a.t_ms < b.t_ms; });
    std::stable_sort(r.biometrics.begin(), r.biometrics.end(),
                     [](const BiometricSample& a, const BiometricSample& b) { return a.t_ms < b.t_ms; });
    return r;
}

Replay replay_trace(const std::filesystem::path& log_path) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open log file " + log_path.string());
    return replay_lines(in);
}

Cue rebased_to_server_time(const ReplayedCue& fired) {
    Cue c = fired.cue;
    c.at_ms = fired.t_server_ms;
    return c;
}

AnalysisReport analyze(const Replay& replay, const AnalyzeOptions& options) {
    const GazeTrace& trace = replay.trace;
    json report;
    report["samples"] = trace.size();
    report["corrupt_lines"] = replay.corrupt_lines;
    report["half_fov_deg"] = options.half_fov_deg;
    if (trace.empty()) {
        report["trace_start_ms"] = nullptr;
        report["trace_end_ms"] = nullptr;
        report["trace_duration_ms"] = 0;
    } else {
        report["trace_start_ms"] = trace.front().t_ms;
        report["trace_end_ms"] = trace.back().t_ms;
        report["trace_duration_ms"] = trace.back().t_ms - trace.front().t_ms;
    }

    if (options.aois) {
        json dwell = json::object();
        for (const auto& [id, ms] : dwell_times(trace, *options.aois)) dwell[id] = ms;
        report["dwell_ms"] = std::move(dwell);
    }

    json visibility = json::object();
    json fired = json::array();
    for (const ReplayedCue& f : replay.fired) {
        visibility[f.cue.id] = cue_visibility(trace, rebased_to_server_time(f), options.half_fov_deg);
        fired.push_back({{"id", f.cue.id}, {"position_ms", f.position_ms}, {"t_server_ms", f.t_server_ms}});
    }
    report["cue_visibility_ms"] = std::move(visibility);
    report["timeline"] = {{"fired", std::move(fired)}, {"skipped", replay.skipped}};

    const HeatmapGrid grid = heatmap(trace, options.grid_cols, options.grid_rows);
    const HeatmapSummary s = summarize(grid);
    report["heatmap"] = {{"cols", grid.cols},
                         {"rows", grid.rows},
                         {"max_bin", {{"col", s.max_col}, {"row", s.max_row}, {"count", s.max_count}}},
                         {"entropy_bits", s.entropy_bits}};

    return {report.dump(2) + "\n", to_pgm(grid)};
}

AnalysisReport analyze(const std::filesystem::path& log_path, const AnalyzeOptions& options) {
    return analyze(replay_trace(log_path), options);
}

std::vector<BiometricRule> parse_rules(std::string_view json_text) {
    json doc = json::parse(json_text.begin(), json_text.end(), nullptr, false);
    if (doc.is_discarded()) throw ParseError(ParseError::Kind::malformed_json, "", "rules file is not valid JSON");
    if (!doc.is_array()) throw ParseError(ParseError::Kind::wrong_type, "", "rules must be a JSON array");
    std::vector<BiometricRule> rules;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        const json& r = doc[i];
        if (!r.is_object()) throw ParseError(ParseError::Kind::wrong_type, path, path + " must be an object");
        auto need = [&](const char* key) -> const json& {
            auto it = r.find(key);
            if (it == r.end()) throw ParseError(ParseError::Kind::missing_field, path + "." + key, path + "." + key + " is missing");
            return *it;
        };
        BiometricRule rule;
        const json& metric = need("metric");
        if (metric != "pulse_bpm") throw ParseError(ParseError::Kind::wrong_type, path + ".metric", path + ".metric must be \"pulse_bpm\"");
        const json& cmp = need("comparator");
        if (cmp == "greater") {
            rule.comparator = BiometricRule::Comparator::greater;
        } else if (cmp == "less") {
            rule.comparator = BiometricRule::Comparator::less;
        } else {
            throw ParseError(ParseError::Kind::wrong_type, path + ".comparator", path + ".comparator must be \"greater\" or \"less\"");
        }
        const json& threshold = need("threshold");
        if (!threshold.is_number()) throw ParseError(ParseError::Kind::wrong_type, path + ".threshold", path + ".threshold must be a number");
        rule.threshold = threshold.get<double>();
        const json& sustain = need("sustain_ms");
        if (!sustain.is_number_integer() || sustain.get<std::int64_t>() < 0) {
            throw ParseError(ParseError::Kind::wrong_type, path + ".sustain_ms", path + ".sustain_ms must be a non-negative integer");
        }
        rule.sustain_ms = sustain.get<std::int64_t>();
        const json& action = need("action");
        if (!action.is_object()) throw ParseError(ParseError::Kind::wrong_type, path + ".action", path + ".action must be an object");
        json as_msg = action;
        as_msg["type"] = "command";
        as_msg["v"] = kProtocolVersion;
        try {
            rule.action = std::get<msg::Cmd>(from_json(as_msg)).command;
        } catch (const ProtocolError& e) {
            throw ParseError(ParseError::Kind::wrong_type, path + ".action", path + ".action: " + e.what());
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

}  // namespace study360
