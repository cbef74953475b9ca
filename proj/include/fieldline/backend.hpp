#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fieldline/mask.hpp"
#include "fieldline/raster.hpp"

namespace fieldline {

struct FieldInstance {
    std::int64_t id = 0;
    InstanceMask mask;
    double score = 1.0;

    void validate() const {
        if (score < 0.0 || score > 1.0)
            throw Error(ErrorCode::Config, "score outside [0,1]");
        if (mask.area() == 0)
            throw Error(ErrorCode::Empty, "instance mask has zero area");
    }
};

struct DetectionSet {
    int width = 0;
    int height = 0;
    std::vector<FieldInstance> instances;

    void validate() const;
};

struct BaselineConfig {
    // Otsu by default; a fixed threshold in [0,1] keeps tests reproducible.
    bool use_otsu = true;
    double fixed_threshold = 0.5;
    int min_area_px = 64;
    bool reclaim_boundary = true;

    void validate() const {
        if (!use_otsu && (fixed_threshold < 0.0 || fixed_threshold > 1.0))
            throw Error(ErrorCode::Config, "fixed threshold outside [0,1]");
        if (min_area_px < 1)
            throw Error(ErrorCode::Config, "min_area_px must be >= 1");
    }
};

class Backend {
public:
    virtual ~Backend() = default;
    // Must return a DetectionSet matching the patch extent; thread-safe for
    // concurrent calls on distinct patches.
    virtual DetectionSet segment(const RasterPatch& patch) const = 0;
};

// Classical edge + components baseline: Sobel gradient, threshold,
// 4-connected components of the non-edge complement, area filter, optional
// one-pixel boundary reclaim.
class BaselineBackend : public Backend {
public:
    explicit BaselineBackend(BaselineConfig cfg);
    DetectionSet segment(const RasterPatch& patch) const override;

private:
    BaselineConfig cfg_;
};

// File-based single-shot subprocess protocol:
//   CMD [user args] --input <path.png> --output <path.rlej>
class ExternalBackend : public Backend {
public:
    explicit ExternalBackend(std::vector<std::string> command);
    DetectionSet segment(const RasterPatch& patch) const override;

private:
    std::vector<std::string> command_;
};

// Fixture-returning backend for tests and protocol plumbing.
class FixtureBackend : public Backend {
public:
    explicit FixtureBackend(DetectionSet fixture) : fixture_(std::move(fixture)) {}
    DetectionSet segment(const RasterPatch&) const override { return fixture_; }

private:
    DetectionSet fixture_;
};

DetectionSet baseline_edge_watershed(const RasterPatch& patch, const BaselineConfig& cfg);

DetectionSet external_segment(const RasterPatch& patch, const std::vector<std::string>& command);

// DetectionSet <-> RleFile conversions for the .rlej interchange format.
RleFile to_rle_file(const DetectionSet& dets);
DetectionSet from_rle_file(const RleFile& file, bool require_scores);

}  // namespace fieldline
