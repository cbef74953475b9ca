#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fieldline/error.hpp"

namespace fieldline {

// Affine north-up geo-referencing. pixel_size_y is stored positive; y
// decreases as rows increase (origin is the top-left raster corner).
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = 1.0;
    int crs_code = 0;  // EPSG

    void validate() const {
        if (pixel_size_x <= 0.0 || pixel_size_y <= 0.0)
            throw Error(ErrorCode::Config, "pixel size must be positive");
        if (crs_code <= 0)
            throw Error(ErrorCode::Config, "EPSG code must be positive");
    }
};

// Maps a pixel-corner index to CRS coordinates. Corner (0,0) is the
// top-left corner of pixel (0,0).
inline std::pair<double, double> corner_to_geo(const GeoTransform& gt, double col, double row) {
    return {gt.origin_x + col * gt.pixel_size_x, gt.origin_y - row * gt.pixel_size_y};
}

struct PixelRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

// 8-bit raster patch, band-interleaved-by-pixel, row-major. Immutable by
// convention after construction.
struct RasterPatch {
    int width = 0;
    int height = 0;
    int bands = 0;
    std::vector<std::uint8_t> pixels;
    std::optional<GeoTransform> geo;

    void validate() const {
        if (width < 1 || height < 1)
            throw Error(ErrorCode::Config, "raster extent must be at least 1x1");
        if (bands < 1 || bands > 4)
            throw Error(ErrorCode::Config, "band count must be in 1..4");
        if (pixels.size() != static_cast<std::size_t>(width) * height * bands)
            throw Error(ErrorCode::Config, "pixel buffer size does not match extent");
        if (geo) geo->validate();
    }

    std::uint8_t sample(int row, int col, int band) const {
        return pixels[(static_cast<std::size_t>(row) * width + col) * bands + band];
    }
};

struct Tile {
    int index = 0;
    int offset_x = 0;
    int offset_y = 0;
    int width = 0;
    int height = 0;
};

struct TileGrid {
    int tile_width = 0;
    int tile_height = 0;
    int overlap = 0;
    int scene_width = 0;
    int scene_height = 0;
    std::vector<Tile> tiles;
};

// Stride-and-clamp tiling: starts at multiples of (tile - overlap), the last
// start clamped so the tile ends at the extent. Extents smaller than the
// tile produce a single truncated tile.
TileGrid build_tile_grid(int width, int height, int tile, int overlap);

// Copies a sub-rect; the geo-transform origin shifts with the offset.
RasterPatch crop(const RasterPatch& patch, const PixelRect& rect);

}  // namespace fieldline
