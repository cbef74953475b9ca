#pragma once

#include <string>
#include <vector>

#include "fieldline/backend.hpp"
#include "fieldline/raster.hpp"

namespace fieldline {

struct StitchConfig {
    double strip_agreement_min = 0.8;
    double nms_iou_max = 0.5;
    double containment_min = 0.8;

    void validate() const {
        auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in01(strip_agreement_min) || !in01(nms_iou_max) || !in01(containment_min))
            throw Error(ErrorCode::Config, "stitch thresholds must be in [0,1]");
    }
};

// Instance ids become tile_index * kTileIdStride + local order index, so
// (tile, local) pairs flatten deterministically.
inline constexpr std::int64_t kTileIdStride = 1'000'000;

// Re-embeds tile-local detections into scene coordinates.
DetectionSet globalize(const DetectionSet& dets, int tile_index, int offset_x, int offset_y,
                       int scene_width, int scene_height);

struct TileDetections {
    int tile_index = 0;
    DetectionSet dets;  // already globalized to scene extent
};

struct StitchResult {
    DetectionSet dets;
    std::vector<std::string> warnings;  // e.g. an instance spanning >= 3 tiles
};

// Phase 1 unions instances that agree inside shared tile strips (or nest
// within one another); phase 2 is greedy mask-IoU suppression. Output order
// and content are independent of tile processing order.
StitchResult stitch(const std::vector<TileDetections>& all_dets, const TileGrid& grid,
                    const StitchConfig& cfg);

}  // namespace fieldline
