#include "fieldline/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace fieldline {

void PipelineConfig::validate() const {
    if (backend_type != "baseline" && backend_type != "exec")
        throw Error(ErrorCode::Config, "backend must be \"baseline\" or \"exec\"");
    if (backend_type == "baseline") baseline.validate();
    if (backend_type == "exec" && exec_command.empty())
        throw Error(ErrorCode::Config, "exec backend requires a command");
    if (tile_px < 1 || overlap_px < 0 || tile_px <= overlap_px)
        throw Error(ErrorCode::Config, "tile must exceed overlap (overlap >= 0)");
    if (simplify_tolerance_px < 0.0)
        throw Error(ErrorCode::Config, "simplify tolerance must be >= 0");
    if (threads < 0)
        throw Error(ErrorCode::Config, "threads must be >= 0");
    stitch.validate();
    eval.validate();
}

std::string PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    if (backend_type == "baseline") {
        j["backend"]["type"] = "baseline";
        if (baseline.use_otsu) j["backend"]["gradient_threshold"] = "otsu";
        else j["backend"]["gradient_threshold"] = baseline.fixed_threshold;
        j["backend"]["min_area_px"] = baseline.min_area_px;
        j["backend"]["reclaim_boundary"] = baseline.reclaim_boundary;
    } else {
        j["backend"]["type"] = "exec";
        j["backend"]["command"] = exec_command;
    }
    j["tile_px"] = tile_px;
    j["overlap_px"] = overlap_px;
    j["stitch"] = {{"strip_agreement_min", stitch.strip_agreement_min},
                   {"nms_iou_max", stitch.nms_iou_max},
                   {"containment_min", stitch.containment_min}};
    j["simplify_tolerance_px"] = simplify_tolerance_px;
    j["eval"] = {{"iou_thresholds", eval.iou_thresholds},
                 {"boundary_thickness_px", eval.boundary_thickness_px},
                 {"max_detections_per_image", eval.max_detections_per_image}};
    // threads is a runtime knob, not part of the pipeline definition; leaving
    // it out keeps exported GeoJSON identical across worker counts
    return j.dump();
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("invalid config JSON: ") + e.what());
    }
    PipelineConfig cfg;
    try {
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            cfg.backend_type = b.value("type", "baseline");
            if (b.contains("gradient_threshold")) {
                if (b["gradient_threshold"].is_string()) {
                    if (b["gradient_threshold"].get<std::string>() != "otsu")
                        throw Error(ErrorCode::Config, "gradient_threshold must be \"otsu\" or a number");
                    cfg.baseline.use_otsu = true;
                } else {
                    cfg.baseline.use_otsu = false;
                    cfg.baseline.fixed_threshold = b["gradient_threshold"].get<double>();
                }
            }
            cfg.baseline.min_area_px = b.value("min_area_px", cfg.baseline.min_area_px);
            cfg.baseline.reclaim_boundary =
                b.value("reclaim_boundary", cfg.baseline.reclaim_boundary);
            if (b.contains("command"))
                cfg.exec_command = b["command"].get<std::vector<std::string>>();
        }
        cfg.tile_px = j.value("tile_px", cfg.tile_px);
        cfg.overlap_px = j.value("overlap_px", cfg.overlap_px);
        if (j.contains("stitch")) {
            const auto& s = j["stitch"];
            cfg.stitch.strip_agreement_min =
                s.value("strip_agreement_min", cfg.stitch.strip_agreement_min);
            cfg.stitch.nms_iou_max = s.value("nms_iou_max", cfg.stitch.nms_iou_max);
            cfg.stitch.containment_min = s.value("containment_min", cfg.stitch.containment_min);
        }
        cfg.simplify_tolerance_px = j.value("simplify_tolerance_px", cfg.simplify_tolerance_px);
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            if (e.contains("iou_thresholds"))
                cfg.eval.iou_thresholds = e["iou_thresholds"].get<std::vector<double>>();
            cfg.eval.boundary_thickness_px =
                e.value("boundary_thickness_px", cfg.eval.boundary_thickness_px);
            cfg.eval.max_detections_per_image =
                e.value("max_detections_per_image", cfg.eval.max_detections_per_image);
        }
        if (j.contains("threads")) {
            if (j["threads"].is_string()) {
                if (j["threads"].get<std::string>() != "auto")
                    throw Error(ErrorCode::Config, "threads must be \"auto\" or an integer");
                cfg.threads = 0;
            } else {
                cfg.threads = j["threads"].get<int>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("invalid config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

int resolve_threads(const PipelineConfig& cfg) {
    int n = cfg.threads;
    if (const char* env = std::getenv("FIELDLINE_THREADS")) {
        try {
            n = std::stoi(env);
        } catch (...) {
            throw Error(ErrorCode::Config, "FIELDLINE_THREADS is not an integer");
        }
    }
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

std::unique_ptr<Backend> make_backend(const PipelineConfig& cfg) {
    if (cfg.backend_type == "baseline")
        return std::make_unique<BaselineBackend>(cfg.baseline);
    return std::make_unique<ExternalBackend>(cfg.exec_command);
}

DelineationResult delineate_scene(const RasterPatch& scene, const PipelineConfig& cfg,
                                  bool keep_tile_dets) {
    cfg.validate();
    scene.validate();
    const auto backend = make_backend(cfg);
    const TileGrid grid = build_tile_grid(scene.width, scene.height, cfg.tile_px, cfg.overlap_px);
    const int workers = std::min<int>(resolve_threads(cfg), static_cast<int>(grid.tiles.size()));

    std::vector<TileDetections> tile_dets(grid.tiles.size());
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= grid.tiles.size()) return;
            try {
                const Tile& t = grid.tiles[i];
                const RasterPatch patch =
                    crop(scene, {t.offset_x, t.offset_y, t.width, t.height});
                DetectionSet local = backend->segment(patch);
                tile_dets[i].tile_index = t.index;
                tile_dets[i].dets = globalize(local, t.index, t.offset_x, t.offset_y,
                                              scene.width, scene.height);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    StitchResult stitched = stitch(tile_dets, grid, cfg.stitch);

    DelineationResult result;
    result.geo = scene.geo;
    result.dets = std::move(stitched.dets);
    result.warnings = std::move(stitched.warnings);
    PolygonizeResult polys =
        to_field_polygons(result.dets, scene.geo, cfg.simplify_tolerance_px);
    result.polygons = std::move(polys.polygons);
    for (auto& w : polys.warnings) result.warnings.push_back(std::move(w));
    if (keep_tile_dets) result.tile_dets = std::move(tile_dets);
    return result;
}

}  // namespace fieldline
