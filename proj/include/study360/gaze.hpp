#pragma once

// Gaze approximation from head orientation: the head-forward vector stands in
// for the eye gaze. Provides projection onto the equirectangular frame, areas
// of interest, dwell accounting, heatmaps and cue visibility.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "study360/geometry.hpp"
#include "study360/study_config.hpp"

namespace study360 {

struct GazeSample {
    std::int64_t t_ms = 0;
    Quat q;
    friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

/// Samples ordered by t_ms. Functions below accept equal neighbouring
/// timestamps (they contribute zero time) but not decreasing ones.
using GazeTrace = std::vector<GazeSample>;

/// Throws std::invalid_argument if timestamps decrease.
void check_trace_order(const GazeTrace& trace);

struct Aoi {
    std::string id;
    Direction center;
    double yaw_width_deg = 360.0;     // full extent, (0, 360]
    double pitch_height_deg = 180.0;  // full extent, (0, 180]
    friend bool operator==(const Aoi&, const Aoi&) = default;
};

struct EquirectPoint {
    double u = 0.0;
    double v = 0.0;
};

struct HeatmapGrid {
    std::int32_t cols = 0;
    std::int32_t rows = 0;
    std::vector<std::uint64_t> counts;  // row-major, rows * cols

    std::uint64_t at(std::int32_t col, std::int32_t row) const { return counts[static_cast<std::size_t>(row) * cols + col]; }
    std::uint64_t total() const;
};

struct HeatmapSummary {
    std::int32_t max_col = 0;
    std::int32_t max_row = 0;
    std::uint64_t max_count = 0;
    double entropy_bits = 0.0;  // Shannon entropy of the normalised counts
};

/// Non-unit input is normalised. Yaw is 0 at the poles.
Direction quat_to_direction(const Quat& q);

/// Batch form of quat_to_direction over a trace (SIMD-dispatched).
std::vector<Direction> trace_directions(const GazeTrace& trace);

EquirectPoint direction_to_equirect(const Direction& d, double width_px, double height_px);

Direction equirect_to_direction(const EquirectPoint& p, double width_px, double height_px);

/// Great-circle angle in degrees, [0, 180].
double angular_distance(const Direction& a, const Direction& b);

bool in_aoi(const Direction& d, const Aoi& aoi);

/// Sample i contributes t[i+1] - t[i] to every AOI that contains it; the last
/// sample contributes nothing. Every AOI id appears in the result.
std::map<std::string, std::int64_t> dwell_times(const GazeTrace& trace, const std::vector<Aoi>& aois);

/// Throws std::invalid_argument when cols or rows is not positive.
HeatmapGrid heatmap(const GazeTrace& trace, std::int32_t cols, std::int32_t rows);

HeatmapSummary summarize(const HeatmapGrid& grid);

/// Plain (P2) PGM text. maxval is the largest count, or 1 for an empty grid.
std::string to_pgm(const HeatmapGrid& grid);

/// Milliseconds inside [cue.at_ms, cue.at_ms + cue.duration_ms] during which
/// the gaze lies within half_fov_deg of the cue anchor, using the dwell rule.
std::int64_t cue_visibility(const GazeTrace& trace, const Cue& cue, double half_fov_deg);

std::vector<Aoi> parse_aois(std::string_view json_text);

}  // namespace study360
