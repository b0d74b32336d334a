#include "study360/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "study360/kernels.hpp"

namespace study360 {

namespace {

Quat normalized_or_identity(const Quat& q) {
    const double n = quat_norm(q);
    if (n == 0.0 || !std::isfinite(n)) return {};
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

}  // namespace

void check_trace_order(const GazeTrace& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i].t_ms < trace[i - 1].t_ms) {
            throw std::invalid_argument("gaze trace timestamps decrease at sample " + std::to_string(i));
        }
    }
}

std::uint64_t HeatmapGrid::total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t c : counts) sum += c;
    return sum;
}

Direction quat_to_direction(const Quat& q) {
    const Quat u = normalized_or_identity(q);
    Vec3 f;
    kernels::forward_vector(u.w, u.x, u.y, u.z, f.x, f.y, f.z);
    return to_direction(f);
}

std::vector<Direction> trace_directions(const GazeTrace& trace) {
    const std::size_t n = trace.size();
    std::vector<double> w(n), x(n), y(n), z(n), fx(n), fy(n), fz(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Quat u = normalized_or_identity(trace[i].q);
        w[i] = u.w;
        x[i] = u.x;
        y[i] = u.y;
        z[i] = u.z;
    }
    kernels::forward_vectors({w, x, y, z}, {fx, fy, fz});
    std::vector<Direction> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = to_direction({fx[i], fy[i], fz[i]});
    return out;
}

EquirectPoint direction_to_equirect(const Direction& d, double width_px, double height_px) {
    return {(d.yaw_deg + 180.0) / 360.0 * width_px, (90.0 - d.pitch_deg) / 180.0 * height_px};
}

Direction equirect_to_direction(const EquirectPoint& p, double width_px, double height_px) {
    return {wrap_yaw_deg(p.u / width_px * 360.0 - 180.0), 90.0 - p.v / height_px * 180.0};
}

double angular_distance(const Direction& a, const Direction& b) {
    // atan2 form of the arccos of the dot product: exact zero for equal
    // inputs and well conditioned near 0 and 180 degrees.
    const Vec3 va = to_unit_vector(a);
    const Vec3 vb = to_unit_vector(b);
    const double s = norm(cross(va, vb));
    const double c = dot(va, vb);
    return std::clamp(std::atan2(s, c) * kRadToDeg, 0.0, 180.0);
}

bool in_aoi(const Direction& d, const Aoi& aoi) {
    return std::abs(wrap_yaw_deg(d.yaw_deg - aoi.center.yaw_deg)) <= aoi.yaw_width_deg / 2.0 &&
           std::abs(d.pitch_deg - aoi.center.pitch_deg) <= aoi.pitch_height_deg / 2.0;
}

std::map<std::string, std::int64_t> dwell_times(const GazeTrace& trace, const std::vector<Aoi>& aois) {
    check_trace_order(trace);
    std::map<std::string, std::int64_t> out;
    for (const Aoi& a : aois) out[a.id] = 0;
    if (trace.size() < 2) return out;
    const std::vector<Direction> dirs = trace_directions(trace);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        const std::int64_t dt = trace[i + 1].t_ms - trace[i].t_ms;
        for (const Aoi& a : aois) {
            if (in_aoi(dirs[i], a)) out[a.id] += dt;
        }
    }
    return out;
}

HeatmapGrid heatmap(const GazeTrace& trace, std::int32_t cols, std::int32_t rows) {
    if (cols <= 0 || rows <= 0) throw std::invalid_argument("heatmap grid needs positive cols and rows");
    HeatmapGrid grid{cols, rows, std::vector<std::uint64_t>(static_cast<std::size_t>(cols) * rows, 0)};
    const std::vector<Direction> dirs = trace_directions(trace);
    std::vector<double> yaw(dirs.size()), pitch(dirs.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        yaw[i] = dirs[i].yaw_deg;
        pitch[i] = dirs[i].pitch_deg;
    }
    std::vector<std::int32_t> bins(dirs.size());
    kernels::equirect_bins(yaw, pitch, cols, rows, bins);
    for (std::int32_t b : bins) ++grid.counts[static_cast<std::size_t>(b)];
    return grid;
}

HeatmapSummary summarize(const HeatmapGrid& grid) {
    HeatmapSummary s;
    const std::uint64_t total = grid.total();
    for (std::int32_t row = 0; row < grid.rows; ++row) {
        for (std::int32_t col = 0; col < grid.cols; ++col) {
            const std::uint64_t c = grid.at(col, row);
            if (c > s.max_count) {
                s.max_count = c;
                s.max_col = col;
                s.max_row = row;
            }
            if (c > 0) {
                const double p = static_cast<double>(c) / static_cast<double>(total);
                s.entropy_bits -= p * std::log2(p);
            }
        }
    }
    return s;
}

std::string to_pgm(const HeatmapGrid& grid) {
    std::uint64_t max_count = 0;
    for (std::uint64_t c : grid.counts) max_count = std::max(max_count, c);
    std::ostringstream out;
    out << "P2\n" << grid.cols << ' ' << grid.rows << '\n' << std::max<std::uint64_t>(max_count, 1) << '\n';
    for (std::int32_t row = 0; row < grid.rows; ++row) {
        for (std::int32_t col = 0; col < grid.cols; ++col) {
            if (col > 0) out << ' ';
            out << grid.at(col, row);
        }
        out << '\n';
    }
    return out.str();
}

std::int64_t cue_visibility(const GazeTrace& trace, const Cue& cue, double half_fov_deg) {
    check_trace_order(trace);
    if (trace.size() < 2) return 0;
    const std::int64_t window_start = cue.at_ms;
    const std::int64_t window_end = cue.at_ms + cue.duration_ms;
    const std::vector<Direction> dirs = trace_directions(trace);
    std::int64_t visible = 0;
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        const std::int64_t lo = std::max(trace[i].t_ms, window_start);
        const std::int64_t hi = std::min(trace[i + 1].t_ms, window_end);
        if (hi <= lo) continue;
        if (angular_distance(dirs[i], cue.anchor) <= half_fov_deg) visible += hi - lo;
    }
    return visible;
}

std::vector<Aoi> parse_aois(std::string_view json_text) {
    using nlohmann::json;
    json doc = json::parse(json_text.begin(), json_text.end(), nullptr, false);
    if (doc.is_discarded()) throw ParseError(ParseError::Kind::malformed_json, "", "AOI file is not valid JSON");
    if (!doc.is_array()) throw ParseError(ParseError::Kind::wrong_type, "", "AOI file must be a JSON array");
    std::vector<Aoi> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        const json& j = doc[i];
        auto need = [&](const char* key) -> const json& {
            if (!j.is_object()) throw ParseError(ParseError::Kind::wrong_type, path, path + " must be an object");
            auto it = j.find(key);
            if (it == j.end()) throw ParseError(ParseError::Kind::missing_field, path + "." + key, "missing " + path + "." + key);
            return *it;
        };
        Aoi a;
        const json& id = need("id");
        if (!id.is_string()) throw ParseError(ParseError::Kind::wrong_type, path + ".id", "AOI id must be a string");
        a.id = id.get<std::string>();
        a.center = direction_from_json(need("center"), path + ".center");
        a.center.yaw_deg = wrap_yaw_deg(a.center.yaw_deg);
        const json& w = need("yaw_width_deg");
        const json& h = need("pitch_height_deg");
        if (!w.is_number() || !(w.get<double>() > 0.0 && w.get<double>() <= 360.0)) {
            throw ParseError(ParseError::Kind::wrong_type, path + ".yaw_width_deg", "yaw_width_deg must be in (0, 360]");
        }
        if (!h.is_number() || !(h.get<double>() > 0.0 && h.get<double>() <= 180.0)) {
            throw ParseError(ParseError::Kind::wrong_type, path + ".pitch_height_deg", "pitch_height_deg must be in (0, 180]");
        }
        a.yaw_width_deg = w.get<double>();
        a.pitch_height_deg = h.get<double>();
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace study360
