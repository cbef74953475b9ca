#include "fieldline/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace fieldline {

namespace {

// Canonical prediction processing order within an image.
std::vector<std::size_t> prediction_order(const DetectionSet& pred) {
    std::vector<std::size_t> order(pred.instances.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = pred.instances[a];
        const auto& pb = pred.instances[b];
        if (pa.score != pb.score) return pa.score > pb.score;
        const auto aa = pa.mask.area(), ab = pb.mask.area();
        if (aa != ab) return aa > ab;
        return pa.id < pb.id;
    });
    return order;
}

MatchResult match_from_matrix(const DetectionSet& gt, const DetectionSet& pred,
                              const std::vector<std::vector<double>>& iou, double thr) {
    MatchResult res;
    std::vector<bool> gt_used(gt.instances.size(), false);
    std::vector<bool> pred_matched(pred.instances.size(), false);
    for (std::size_t p : prediction_order(pred)) {
        double best = -1.0;
        std::size_t best_g = 0;
        bool found = false;
        for (std::size_t g = 0; g < gt.instances.size(); ++g) {
            if (gt_used[g]) continue;
            const double v = iou[p][g];
            if (v < thr) continue;
            if (v > best || (v == best && found && gt.instances[g].id < gt.instances[best_g].id)) {
                best = v;
                best_g = g;
                found = true;
            }
        }
        if (found) {
            gt_used[best_g] = true;
            pred_matched[p] = true;
            res.matches.push_back({p, best_g, best});
        }
    }
    for (std::size_t p = 0; p < pred.instances.size(); ++p)
        if (!pred_matched[p]) res.unmatched_pred.push_back(p);
    for (std::size_t g = 0; g < gt.instances.size(); ++g)
        if (!gt_used[g]) res.unmatched_gt.push_back(g);
    return res;
}

std::vector<std::vector<double>> iou_matrix(const DetectionSet& gt, const DetectionSet& pred) {
    std::vector<std::vector<double>> iou(pred.instances.size(),
                                         std::vector<double>(gt.instances.size(), 0.0));
    for (std::size_t p = 0; p < pred.instances.size(); ++p)
        for (std::size_t g = 0; g < gt.instances.size(); ++g)
            iou[p][g] = mask_iou(pred.instances[p].mask, gt.instances[g].mask);
    return iou;
}

}  // namespace

MatchResult match_instances(const DetectionSet& gt, const DetectionSet& pred, double thr) {
    if (gt.width != pred.width || gt.height != pred.height)
        throw Error(ErrorCode::Shape, "GT and prediction scene dimensions differ");
    return match_from_matrix(gt, pred, iou_matrix(gt, pred), thr);
}

double average_precision(std::vector<RankedOutcome> outcomes, std::uint64_t total_gt) {
    if (total_gt == 0)
        throw Error(ErrorCode::Eval, "AP undefined: zero ground-truth instances");
    std::sort(outcomes.begin(), outcomes.end(), [](const RankedOutcome& a, const RankedOutcome& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image_index != b.image_index) return a.image_index < b.image_index;
        return a.id < b.id;
    });

    std::vector<double> precision, recall;
    std::uint64_t tp = 0, fp = 0;
    for (const auto& o : outcomes) {
        if (o.is_tp) ++tp;
        else ++fp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    }

    // Monotone envelope: best precision achievable at recall >= r.
    for (std::size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double sum = 0.0;
    std::size_t pos = 0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        while (pos < recall.size() && recall[pos] < r) ++pos;
        if (pos < precision.size()) sum += precision[pos];
    }
    return sum / 101.0;
}

EvalReport evaluate(const std::vector<DetectionSet>& gt_sets,
                    const std::vector<DetectionSet>& pred_sets, const EvalConfig& cfg) {
    cfg.validate();
    if (gt_sets.size() != pred_sets.size())
        throw Error(ErrorCode::Shape, "GT and prediction image lists differ in length");

    EvalReport report;
    report.config = cfg;

    std::vector<std::string> shape_errors;
    for (std::size_t i = 0; i < gt_sets.size(); ++i) {
        if (gt_sets[i].width != pred_sets[i].width || gt_sets[i].height != pred_sets[i].height)
            shape_errors.push_back("image " + std::to_string(i) + ": " +
                                   std::to_string(gt_sets[i].width) + "x" +
                                   std::to_string(gt_sets[i].height) + " vs " +
                                   std::to_string(pred_sets[i].width) + "x" +
                                   std::to_string(pred_sets[i].height));
    }
    if (!shape_errors.empty()) {
        std::string msg = "dimension mismatch on " + std::to_string(shape_errors.size()) +
                          " image(s): " + shape_errors.front();
        throw Error(ErrorCode::Shape, msg);
    }

    std::uint64_t total_gt = 0;
    for (const auto& g : gt_sets) total_gt += g.instances.size();

    // Cap detections per image by score order, then build IoU matrices once.
    std::vector<DetectionSet> preds = pred_sets;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (static_cast<int>(preds[i].instances.size()) > cfg.max_detections_per_image) {
            report.warnings.push_back("image " + std::to_string(i) + ": " +
                                     std::to_string(preds[i].instances.size()) +
                                     " detections capped to " +
                                     std::to_string(cfg.max_detections_per_image));
            auto order = prediction_order(preds[i]);
            order.resize(cfg.max_detections_per_image);
            DetectionSet capped;
            capped.width = preds[i].width;
            capped.height = preds[i].height;
            for (std::size_t k : order) capped.instances.push_back(preds[i].instances[k]);
            preds[i] = std::move(capped);
        }
    }

    if (total_gt == 0)
        throw Error(ErrorCode::Eval, "AP undefined: zero ground-truth instances");

    std::vector<std::vector<std::vector<double>>> matrices(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        matrices[i] = iou_matrix(gt_sets[i], preds[i]);

    // Counts and mean matched IoU are reported at threshold 0.5 regardless
    // of the configured threshold list.
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const MatchResult m = match_from_matrix(gt_sets[i], preds[i], matrices[i], 0.5);
        report.tp += m.matches.size();
        report.fp += m.unmatched_pred.size();
        report.fn += m.unmatched_gt.size();
        for (const auto& mp : m.matches) report.mean_matched_iou += mp.iou;
    }

    for (double thr : cfg.iou_thresholds) {
        std::vector<RankedOutcome> outcomes;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const MatchResult m = match_from_matrix(gt_sets[i], preds[i], matrices[i], thr);
            std::vector<bool> is_tp(preds[i].instances.size(), false);
            for (const auto& mp : m.matches) is_tp[mp.pred_index] = true;
            for (std::size_t p = 0; p < preds[i].instances.size(); ++p)
                outcomes.push_back({preds[i].instances[p].score, i, preds[i].instances[p].id,
                                    is_tp[p]});
        }
        report.ap_per_threshold.emplace_back(thr, average_precision(outcomes, total_gt));
    }

    if (report.tp > 0) report.mean_matched_iou /= static_cast<double>(report.tp);
    for (const auto& [thr, ap] : report.ap_per_threshold) {
        if (thr == 0.5) report.map50 = ap;
        report.map50_95 += ap;
    }
    report.map50_95 /= static_cast<double>(report.ap_per_threshold.size());
    return report;
}

BoundaryIouResult boundary_semantic_iou(const std::vector<DetectionSet>& gt_sets,
                                        const std::vector<DetectionSet>& pred_sets,
                                        int thickness) {
    if (gt_sets.size() != pred_sets.size())
        throw Error(ErrorCode::Shape, "GT and prediction image lists differ in length");
    BoundaryIouResult res;
    for (std::size_t i = 0; i < gt_sets.size(); ++i) {
        const auto& g = gt_sets[i];
        const auto& p = pred_sets[i];
        if (g.width != p.width || g.height != p.height)
            throw Error(ErrorCode::Shape, "dimension mismatch on image " + std::to_string(i));
        auto band_union = [&](const DetectionSet& s) -> std::optional<InstanceMask> {
            std::vector<InstanceMask> bands;
            for (const auto& inst : s.instances)
                bands.push_back(boundary_band(inst.mask, thickness));
            if (bands.empty()) return std::nullopt;
            return mask_union(bands);
        };
        const auto gb = band_union(g);
        const auto pb = band_union(p);
        double iou = 0.0;
        if (gb && pb) iou = mask_iou(*gb, *pb);
        res.per_image.push_back(iou);
    }
    if (!res.per_image.empty())
        res.mean = std::accumulate(res.per_image.begin(), res.per_image.end(), 0.0) /
                   static_cast<double>(res.per_image.size());
    return res;
}

LatencyStats bench(const std::function<void(const std::string&)>& run,
                   const std::vector<std::string>& images, int warmup) {
    if (warmup < 0) throw Error(ErrorCode::Config, "warmup count must be >= 0");
    if (static_cast<int>(images.size()) <= warmup)
        throw Error(ErrorCode::Bench, "empty benchmark: no images after warm-up exclusion");

    std::vector<double> samples;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            run(images[i]);
        } catch (const Error& e) {
            throw Error(e.code(), images[i] + ": " + e.detail());
        }
        const auto t1 = std::chrono::steady_clock::now();
        if (static_cast<int>(i) >= warmup)
            samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    auto percentile = [&](double q) {
        const std::size_t idx = static_cast<std::size_t>(
            std::ceil(q * static_cast<double>(sorted.size())));
        return sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
    };
    LatencyStats stats;
    stats.samples = static_cast<int>(samples.size());
    stats.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) /
                    static_cast<double>(samples.size());
    stats.p50_ms = percentile(0.50);
    stats.p95_ms = percentile(0.95);
    return stats;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["config"]["iou_thresholds"] = config.iou_thresholds;
    j["config"]["boundary_thickness_px"] = config.boundary_thickness_px;
    j["config"]["max_detections_per_image"] = config.max_detections_per_image;
    j["ap"] = nlohmann::ordered_json::array();
    for (const auto& [thr, ap] : ap_per_threshold)
        j["ap"].push_back({{"thr", thr}, {"ap", ap}});
    j["map50"] = map50;
    j["map50_95"] = map50_95;
    j["counts"] = {{"tp", tp}, {"fp", fp}, {"fn", fn}};
    j["mean_matched_iou"] = mean_matched_iou;
    if (boundary_iou) j["boundary_iou"] = *boundary_iou;
    else j["boundary_iou"] = nullptr;
    if (latency) {
        j["latency_ms"] = {{"mean", latency->mean_ms},
                           {"p50", latency->p50_ms},
                           {"p95", latency->p95_ms},
                           {"samples", latency->samples}};
    } else {
        j["latency_ms"] = nullptr;
    }
    if (!warnings.empty()) j["warnings"] = warnings;
    return j.dump();
}

}  // namespace fieldline
