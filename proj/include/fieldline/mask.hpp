#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldline/error.hpp"
#include "fieldline/raster.hpp"

namespace fieldline {

// Row-major boolean raster, the decoded form of an InstanceMask.
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // 0/1, index = row * width + col

    Bitmap() = default;
    Bitmap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int row, int col) const {
        return data[static_cast<std::size_t>(row) * width + col];
    }
    void set(int row, int col, bool v = true) {
        data[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
    }
};

// Run-length-encoded binary mask over a column-major scan (COCO uncompressed
// convention): counts alternate background/foreground starting with the
// background run, which may be 0.
struct InstanceMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> counts;

    std::uint64_t area() const {
        std::uint64_t a = 0;
        for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
        return a;
    }

    bool empty() const { return area() == 0; }

    // Throws ErrorCode::Rle if the counts violate the invariants.
    void validate() const;

    bool operator==(const InstanceMask&) const = default;
};

InstanceMask rle_encode(const Bitmap& bitmap);
Bitmap rle_decode(const InstanceMask& mask);

// Exact integer-rational IoU; both-empty is defined as 0.
double mask_iou(const InstanceMask& a, const InstanceMask& b);

// Intersection pixel count without decoding.
std::uint64_t rle_intersection_area(const InstanceMask& a, const InstanceMask& b);

// mask minus its thickness-fold 4-connected erosion (frame = background).
InstanceMask boundary_band(const InstanceMask& mask, int thickness);

// Components ordered by minimum column-major linear index.
std::vector<InstanceMask> connected_components(const Bitmap& bitmap, int connectivity);

InstanceMask mask_union(const std::vector<InstanceMask>& masks);

// Foreground intersected with an axis-aligned rect (scene coordinates),
// result stays scene-sized.
InstanceMask mask_intersect_rect(const InstanceMask& mask, const PixelRect& rect);

// Foreground inside rect re-encoded as a rect-local mask.
InstanceMask mask_crop(const InstanceMask& mask, const PixelRect& rect);

// Tile-local mask re-embedded at an offset within a larger scene.
InstanceMask mask_embed(const InstanceMask& mask, int offset_x, int offset_y,
                        int scene_width, int scene_height);

// Tight foreground bbox; width/height 0 when empty.
PixelRect mask_bbox(const InstanceMask& mask);

// ---- .rlej interchange -------------------------------------------------

struct RleRecord {
    std::int64_t id = 0;
    bool has_score = false;
    double score = 0.0;
    InstanceMask mask;
};

struct RleFile {
    int width = 0;
    int height = 0;
    std::vector<RleRecord> instances;
};

std::string rlej_serialize(const RleFile& file);
RleFile rlej_parse(const std::string& text);
void rlej_write(const RleFile& file, const std::string& path);
RleFile rlej_read(const std::string& path);

}  // namespace fieldline
