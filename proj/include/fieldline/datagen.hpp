#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fieldline/backend.hpp"
#include "fieldline/raster.hpp"
#include "fieldline/vector.hpp"

namespace fieldline {

struct ManifestEntry {
    std::string image_path;
    std::string annotation_path;
    double resolution_m_per_px = 1.0;
    std::string region_tag;
    std::string split;  // "train" | "test" | "" when unassigned
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t image_count = 0;
    std::uint64_t instance_count = 0;
};

// JSON-lines, one entry per line.
void manifest_write(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> manifest_read(const std::string& path);

struct PatchExtractionConfig {
    int patch_size_px = 512;
    int stride_px = 512;
    int min_field_px = 32;
    bool drop_empty = true;

    void validate() const {
        if (patch_size_px < 64)
            throw Error(ErrorCode::Config, "patch size must be >= 64");
        if (stride_px < 1 || stride_px > patch_size_px)
            throw Error(ErrorCode::Config, "stride must be in 1..patch_size");
        if (min_field_px < 1)
            throw Error(ErrorCode::Config, "min_field_px must be >= 1");
    }
};

struct RasterizeWarning {
    std::size_t parcel_a;
    std::size_t parcel_b;
    std::uint64_t pixels;
};

struct RasterizeResult {
    std::vector<InstanceMask> masks;  // follows input parcel order; empty parcels dropped
    std::vector<std::size_t> source_indices;
    std::vector<RasterizeWarning> warnings;
};

struct Parcel {
    Ring exterior;            // geo coordinates
    std::vector<Ring> holes;
};

// Pixel-center membership, even-odd rule, half-open top-left ties. Pixels
// claimed by multiple parcels go to the smaller parcel.
RasterizeResult rasterize_parcels(const std::vector<Parcel>& parcels, const GeoTransform& gt,
                                  int width, int height);

struct ExtractedPatch {
    PixelRect rect;         // position in the scene
    RasterPatch patch;
    DetectionSet annotations;  // scores absent (carried as 1.0 placeholders)
};

std::vector<ExtractedPatch> extract_patches(const RasterPatch& scene,
                                            const std::vector<InstanceMask>& masks,
                                            const PatchExtractionConfig& cfg);

struct DatasetStats {
    std::uint64_t image_count = 0;
    std::uint64_t instance_count = 0;
    std::map<double, std::uint64_t> images_per_resolution;
    // Field-count histogram buckets: <10, 10-49, 50-99, 100-299, >=300.
    std::array<std::uint64_t, 5> field_histogram{};
    std::vector<std::string> entry_errors;
    double completeness = 1.0;

    std::string to_json() const;
};

DatasetStats dataset_stats(const std::vector<ManifestEntry>& entries);

struct SplitResult {
    std::vector<ManifestEntry> entries;  // with split assigned
    std::vector<std::string> warnings;
};

// Spatial-block split: entries grouped by quantized geo origin, whole blocks
// assigned to test by seeded hash until the fraction is met.
SplitResult split_manifest(const std::vector<ManifestEntry>& entries, double test_fraction,
                           std::uint64_t seed, int block_px);

}  // namespace fieldline
