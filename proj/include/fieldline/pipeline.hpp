#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fieldline/backend.hpp"
#include "fieldline/eval.hpp"
#include "fieldline/stitch.hpp"
#include "fieldline/vector.hpp"

namespace fieldline {

struct PipelineConfig {
    std::string backend_type = "baseline";     // "baseline" | "exec"
    BaselineConfig baseline;
    std::vector<std::string> exec_command;
    int tile_px = 512;
    int overlap_px = 64;
    StitchConfig stitch;
    double simplify_tolerance_px = 1.0;
    EvalConfig eval;
    int threads = 0;  // 0 = auto; FIELDLINE_THREADS env overrides

    void validate() const;

    // Fully-resolved config echoed into every output artifact.
    std::string to_json() const;
    static PipelineConfig from_json(const std::string& text);
};

// Effective worker count after the env override.
int resolve_threads(const PipelineConfig& cfg);

std::unique_ptr<Backend> make_backend(const PipelineConfig& cfg);

struct DelineationResult {
    DetectionSet dets;                 // stitched scene detections
    std::vector<FieldPolygon> polygons;
    std::vector<std::string> warnings;
    std::optional<GeoTransform> geo;
    // Per-tile globalized detections, kept only when debug dumps are on.
    std::vector<TileDetections> tile_dets;
};

// tile -> segment -> globalize -> stitch -> vectorize. Deterministic for a
// fixed config regardless of thread count.
DelineationResult delineate_scene(const RasterPatch& scene, const PipelineConfig& cfg,
                                  bool keep_tile_dets = false);

}  // namespace fieldline
