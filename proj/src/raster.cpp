#include "fieldline/raster.hpp"

#include <algorithm>

namespace fieldline {

namespace {

std::vector<int> axis_starts(int extent, int tile, int stride) {
    std::vector<int> starts;
    if (extent <= tile) {
        starts.push_back(0);
        return starts;
    }
    for (int s = 0; s < extent; s += stride) {
        int clamped = std::min(s, extent - tile);
        if (clamped < 0) clamped = 0;
        starts.push_back(clamped);
        if (clamped == extent - tile) break;
    }
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
    return starts;
}

}  // namespace

TileGrid build_tile_grid(int width, int height, int tile, int overlap) {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::Config, "extent must be at least 1x1");
    if (overlap < 0 || tile <= overlap)
        throw Error(ErrorCode::Config, "tile must exceed overlap (overlap >= 0)");

    const int stride = tile - overlap;
    const auto xs = axis_starts(width, tile, stride);
    const auto ys = axis_starts(height, tile, stride);

    TileGrid grid;
    grid.tile_width = tile;
    grid.tile_height = tile;
    grid.overlap = overlap;
    grid.scene_width = width;
    grid.scene_height = height;
    int index = 0;
    for (int oy : ys) {
        for (int ox : xs) {
            Tile t;
            t.index = index++;
            t.offset_x = ox;
            t.offset_y = oy;
            t.width = std::min(tile, width - ox);
            t.height = std::min(tile, height - oy);
            grid.tiles.push_back(t);
        }
    }
    return grid;
}

RasterPatch crop(const RasterPatch& patch, const PixelRect& rect) {
    patch.validate();
    if (rect.width < 1 || rect.height < 1)
        throw Error(ErrorCode::Bounds, "crop rect must be at least 1x1");
    if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > patch.width ||
        rect.y + rect.height > patch.height)
        throw Error(ErrorCode::Bounds, "crop rect outside patch extent");

    RasterPatch out;
    out.width = rect.width;
    out.height = rect.height;
    out.bands = patch.bands;
    out.pixels.resize(static_cast<std::size_t>(rect.width) * rect.height * patch.bands);
    const std::size_t row_bytes = static_cast<std::size_t>(rect.width) * patch.bands;
    for (int r = 0; r < rect.height; ++r) {
        const std::uint8_t* src =
            patch.pixels.data() +
            (static_cast<std::size_t>(rect.y + r) * patch.width + rect.x) * patch.bands;
        std::copy(src, src + row_bytes, out.pixels.begin() + r * row_bytes);
    }
    if (patch.geo) {
        GeoTransform g = *patch.geo;
        g.origin_x += rect.x * g.pixel_size_x;
        g.origin_y -= rect.y * g.pixel_size_y;
        out.geo = g;
    }
    return out;
}

}  // namespace fieldline
