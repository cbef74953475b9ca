#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fieldline/backend.hpp"

namespace fieldline {

struct EvalConfig {
    std::vector<double> iou_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    int boundary_thickness_px = 2;
    int max_detections_per_image = 300;

    void validate() const {
        if (iou_thresholds.empty())
            throw Error(ErrorCode::Config, "threshold list is empty");
        double prev = 0.0;
        for (double t : iou_thresholds) {
            if (t <= prev || t > 1.0)
                throw Error(ErrorCode::Config,
                            "thresholds must be strictly increasing in (0,1]");
            prev = t;
        }
        if (boundary_thickness_px < 1)
            throw Error(ErrorCode::Config, "boundary thickness must be >= 1");
        if (max_detections_per_image < 1)
            throw Error(ErrorCode::Config, "max detections must be >= 1");
    }
};

struct LatencyStats {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    int samples = 0;
};

struct EvalReport {
    EvalConfig config;
    std::vector<std::pair<double, double>> ap_per_threshold;
    double map50 = 0.0;
    double map50_95 = 0.0;
    std::uint64_t tp = 0, fp = 0, fn = 0;  // at threshold 0.5
    double mean_matched_iou = 0.0;
    std::optional<double> boundary_iou;
    std::optional<LatencyStats> latency;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

struct MatchPair {
    std::size_t pred_index;
    std::size_t gt_index;
    double iou;
};

struct MatchResult {
    std::vector<MatchPair> matches;
    std::vector<std::size_t> unmatched_pred;  // false positives
    std::vector<std::size_t> unmatched_gt;    // false negatives
};

// Greedy one-to-one matching: predictions in (score desc, area desc, id asc)
// order take the unmatched GT of maximal IoU when IoU >= thr; GT ties break
// toward the lowest GT id.
MatchResult match_instances(const DetectionSet& gt, const DetectionSet& pred, double thr);

// 101-point interpolated AP over pooled, score-ranked predictions.
// `outcomes` holds (score, image_index, id, is_tp) tuples.
struct RankedOutcome {
    double score;
    std::size_t image_index;
    std::int64_t id;
    bool is_tp;
};
double average_precision(std::vector<RankedOutcome> outcomes, std::uint64_t total_gt);

EvalReport evaluate(const std::vector<DetectionSet>& gt_sets,
                    const std::vector<DetectionSet>& pred_sets, const EvalConfig& cfg);

struct BoundaryIouResult {
    std::vector<double> per_image;
    double mean = 0.0;
};

// Semantic boundary IoU: per image, the IoU between the unions of GT and
// predicted per-instance boundary bands.
BoundaryIouResult boundary_semantic_iou(const std::vector<DetectionSet>& gt_sets,
                                        const std::vector<DetectionSet>& pred_sets,
                                        int thickness);

// Times `run(image_path)` per image; the first `warmup` entries are excluded.
LatencyStats bench(const std::function<void(const std::string&)>& run,
                   const std::vector<std::string>& images, int warmup = 3);

}  // namespace fieldline
