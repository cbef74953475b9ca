#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fieldline/backend.hpp"
#include "fieldline/mask.hpp"
#include "fieldline/raster.hpp"

namespace fieldline {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

// Closed ring: first vertex equals the last, at least 4 entries.
using Ring = std::vector<Point>;

// Signed shoelace area; image-axis convention (x right, y down) makes
// clockwise-on-screen rings positive.
double ring_signed_area(const Ring& ring);

struct ContourSet {
    Ring exterior;            // positive signed area
    std::vector<Ring> holes;  // negative signed area
};

// Crack-following contour extraction: vertices at integer pixel corners, one
// exterior per 4-connected component, one hole per enclosed background
// region. Net area equals the mask pixel count exactly.
std::vector<ContourSet> trace_contours(const InstanceMask& mask);

// Closed-ring Douglas-Peucker anchored at the two mutually farthest
// vertices; tolerance 0 removes nothing.
Ring simplify(const Ring& ring, double tolerance);

struct FieldPolygon {
    Ring exterior;
    std::vector<Ring> holes;
    std::int64_t source_id = 0;
    double score = 1.0;
    double area = 0.0;  // CRS units^2 (m^2 for metric CRSs)
};

struct PolygonizeResult {
    std::vector<FieldPolygon> polygons;
    std::vector<std::string> warnings;  // skipped zero-area instances
};

PolygonizeResult to_field_polygons(const DetectionSet& dets,
                                   const std::optional<GeoTransform>& gt,
                                   double tolerance_px);

// GeoJSON FeatureCollection. `pipeline_config` (serialized JSON) is embedded
// as a "pipeline" foreign member when non-empty; pixel-space output carries
// "crs_note":"pixel".
std::string polygons_to_geojson(const std::vector<FieldPolygon>& polygons,
                                const std::optional<GeoTransform>& gt,
                                const std::string& pipeline_config);

}  // namespace fieldline
