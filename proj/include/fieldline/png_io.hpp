#pragma once

#include <string>

#include "fieldline/raster.hpp"

namespace fieldline {

// 8-bit PNG in 1-4 channels. A sidecar "<name>.geo.json" next to the image
// supplies the geo-transform; without one the patch is in pixel-space mode.
RasterPatch read_raster(const std::string& png_path);

void write_raster(const RasterPatch& patch, const std::string& png_path);

// Sidecar path for a raster path ("scene.png" -> "scene.geo.json").
std::string sidecar_path(const std::string& png_path);

}  // namespace fieldline
