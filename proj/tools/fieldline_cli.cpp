#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fieldline/datagen.hpp"
#include "fieldline/eval.hpp"
#include "fieldline/pipeline.hpp"
#include "fieldline/png_io.hpp"

namespace fs = std::filesystem;
using namespace fieldline;

namespace {

std::string slurp(const std::string& path, ErrorCode code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(code, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

struct ConfigOpts {
    std::string config_path;
    std::string threshold;  // "otsu" or a number
    int threads = -1;
    int tile_px = -1;
    int overlap_px = -1;
    double simplify_tol = -1.0;
    std::vector<std::string> exec_command;
};

void add_config_flags(CLI::App* cmd, ConfigOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config JSON file");
    cmd->add_option("--threshold", opts.threshold, "baseline gradient threshold (otsu or 0..1)");
    cmd->add_option("--threads", opts.threads, "worker threads (0 = auto)");
    cmd->add_option("--tile", opts.tile_px, "tile size in pixels");
    cmd->add_option("--overlap", opts.overlap_px, "tile overlap in pixels");
    cmd->add_option("--simplify", opts.simplify_tol, "polygon simplification tolerance (px)");
    cmd->add_option("--exec", opts.exec_command, "external backend command and args");
}

PipelineConfig resolve_config(const ConfigOpts& opts) {
    PipelineConfig cfg;
    if (!opts.config_path.empty())
        cfg = PipelineConfig::from_json(slurp(opts.config_path, ErrorCode::Config));
    if (!opts.threshold.empty()) {
        if (opts.threshold == "otsu") {
            cfg.baseline.use_otsu = true;
        } else {
            cfg.baseline.use_otsu = false;
            cfg.baseline.fixed_threshold = std::stod(opts.threshold);
        }
    }
    if (opts.threads >= 0) cfg.threads = opts.threads;
    if (opts.tile_px > 0) cfg.tile_px = opts.tile_px;
    if (opts.overlap_px >= 0) cfg.overlap_px = opts.overlap_px;
    if (opts.simplify_tol >= 0.0) cfg.simplify_tolerance_px = opts.simplify_tol;
    if (!opts.exec_command.empty()) {
        cfg.backend_type = "exec";
        cfg.exec_command = opts.exec_command;
    }
    cfg.validate();
    return cfg;
}

std::string geojson_output_path(const std::string& input, const std::string& out_arg,
                                bool multiple) {
    if (out_arg.empty() || multiple) {
        fs::path base = out_arg.empty() ? fs::path(input).parent_path() : fs::path(out_arg);
        fs::path name = fs::path(input).stem();
        return (base / (name.string() + ".geojson")).string();
    }
    return out_arg;
}

int cmd_delineate(const std::vector<std::string>& inputs, const ConfigOpts& opts,
                  const std::string& output, const std::string& dump_dir) {
    const PipelineConfig cfg = resolve_config(opts);
    const bool multiple = inputs.size() > 1;
    for (const auto& input : inputs) {
        const RasterPatch scene = read_raster(input);
        const DelineationResult result = delineate_scene(scene, cfg, !dump_dir.empty());
        for (const auto& w : result.warnings) std::cerr << "W: " << w << "\n";

        if (!dump_dir.empty()) {
            fs::create_directories(dump_dir);
            for (const auto& td : result.tile_dets) {
                const std::string p = (fs::path(dump_dir) /
                                       (fs::path(input).stem().string() + "_tile" +
                                        std::to_string(td.tile_index) + ".rlej"))
                                          .string();
                rlej_write(to_rle_file(td.dets), p);
            }
        }

        const std::string out_path = geojson_output_path(input, output, multiple);
        write_text(out_path, polygons_to_geojson(result.polygons, scene.geo, cfg.to_json()));
        std::cout << input << " -> " << out_path << " (" << result.polygons.size()
                  << " fields)\n";
    }
    return 0;
}

DetectionSet load_annotation_set(const std::string& path) {
    return from_rle_file(rlej_read(path), /*require_scores=*/false);
}

int cmd_evaluate(const std::string& manifest_path, const std::string& pred_dir,
                 const ConfigOpts& opts, const std::string& report_path, bool with_boundary) {
    const PipelineConfig cfg = resolve_config(opts);
    const auto entries = manifest_read(manifest_path);

    std::vector<DetectionSet> gt_sets, pred_sets;
    for (const auto& e : entries) {
        DetectionSet gt = load_annotation_set(e.annotation_path);
        const std::string pred_path =
            (fs::path(pred_dir) / (fs::path(e.annotation_path).stem().string() + ".rlej"))
                .string();
        DetectionSet pred;
        pred.width = gt.width;
        pred.height = gt.height;
        if (fs::exists(pred_path)) {
            pred = load_annotation_set(pred_path);
        } else {
            std::cerr << "W: no prediction for " << e.annotation_path
                      << "; scoring as empty\n";
        }
        gt_sets.push_back(std::move(gt));
        pred_sets.push_back(std::move(pred));
    }

    EvalReport report = evaluate(gt_sets, pred_sets, cfg.eval);
    if (with_boundary)
        report.boundary_iou =
            boundary_semantic_iou(gt_sets, pred_sets, cfg.eval.boundary_thickness_px).mean;
    for (const auto& w : report.warnings) std::cerr << "W: " << w << "\n";

    if (!report_path.empty()) write_text(report_path, report.to_json());
    char line[128];
    std::snprintf(line, sizeof(line), "mAP@0.5=%.3f mAP@0.5:0.95=%.3f", report.map50,
                  report.map50_95);
    std::cout << line << "\n";
    return 0;
}

Ring parse_ring(const nlohmann::json& arr) {
    Ring r;
    for (const auto& p : arr) r.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return r;
}

int cmd_rasterize(const std::string& parcels_path, const std::string& out_path, double origin_x,
                  double origin_y, double pixel_size, int epsg, int width, int height) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(slurp(parcels_path, ErrorCode::Io));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, parcels_path + ": " + e.what());
    }
    std::vector<Parcel> parcels;
    try {
        for (const auto& feat : j.at("features")) {
            const auto& geom = feat.at("geometry");
            if (geom.at("type").get<std::string>() != "Polygon")
                throw Error(ErrorCode::Ring, "only Polygon features are supported");
            Parcel p;
            const auto& coords = geom.at("coordinates");
            p.exterior = parse_ring(coords.at(0));
            for (std::size_t i = 1; i < coords.size(); ++i)
                p.holes.push_back(parse_ring(coords.at(i)));
            parcels.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, parcels_path + ": " + e.what());
    }

    GeoTransform gt{origin_x, origin_y, pixel_size, pixel_size, epsg};
    const RasterizeResult result = rasterize_parcels(parcels, gt, width, height);
    for (const auto& w : result.warnings)
        std::cerr << "W: parcels " << w.parcel_a << " and " << w.parcel_b << " overlap on "
                  << w.pixels << " px\n";

    RleFile file;
    file.width = width;
    file.height = height;
    for (std::size_t i = 0; i < result.masks.size(); ++i) {
        RleRecord rec;
        rec.id = static_cast<std::int64_t>(result.source_indices[i]);
        rec.has_score = false;
        rec.mask = result.masks[i];
        file.instances.push_back(std::move(rec));
    }
    rlej_write(file, out_path);
    std::cout << out_path << " (" << file.instances.size() << " parcels)\n";
    return 0;
}

int cmd_patches(const std::string& scene_path, const std::string& ann_path,
                const std::string& out_dir, int patch_size, int stride, int min_field_px,
                bool keep_empty, const std::string& region_tag) {
    const RasterPatch scene = read_raster(scene_path);
    const RleFile ann = rlej_read(ann_path);
    std::vector<InstanceMask> masks;
    for (const auto& rec : ann.instances) masks.push_back(rec.mask);

    PatchExtractionConfig cfg;
    cfg.patch_size_px = patch_size;
    cfg.stride_px = stride > 0 ? stride : patch_size;
    cfg.min_field_px = min_field_px;
    cfg.drop_empty = !keep_empty;

    const auto patches = extract_patches(scene, masks, cfg);
    fs::create_directories(out_dir);
    std::vector<ManifestEntry> entries;
    const std::string stem = fs::path(scene_path).stem().string();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const std::string base = stem + "_p" + std::to_string(i);
        const std::string img = (fs::path(out_dir) / (base + ".png")).string();
        const std::string rlej = (fs::path(out_dir) / (base + ".rlej")).string();
        write_raster(patches[i].patch, img);
        RleFile f = to_rle_file(patches[i].annotations);
        for (auto& rec : f.instances) rec.has_score = false;
        rlej_write(f, rlej);
        ManifestEntry e;
        e.image_path = img;
        e.annotation_path = rlej;
        e.resolution_m_per_px = scene.geo ? scene.geo->pixel_size_x : 1.0;
        e.region_tag = region_tag;
        entries.push_back(std::move(e));
    }
    manifest_write(entries, (fs::path(out_dir) / "manifest.jsonl").string());
    std::cout << out_dir << " (" << patches.size() << " patches)\n";
    return 0;
}

int cmd_stats(const std::string& manifest_path, const std::string& report_path) {
    const auto entries = manifest_read(manifest_path);
    const DatasetStats stats = dataset_stats(entries);
    const std::string json = stats.to_json();
    if (!report_path.empty()) write_text(report_path, json);
    std::cout << json << "\n";
    return 0;
}

int cmd_split(const std::string& manifest_path, const std::string& out_path,
              double test_fraction, std::uint64_t seed, int block_px) {
    const auto entries = manifest_read(manifest_path);
    const SplitResult result = split_manifest(entries, test_fraction, seed, block_px);
    for (const auto& w : result.warnings) std::cerr << "W: " << w << "\n";
    manifest_write(result.entries, out_path);
    std::uint64_t test_n = 0;
    for (const auto& e : result.entries)
        if (e.split == "test") ++test_n;
    std::cout << out_path << " (" << test_n << "/" << result.entries.size() << " test)\n";
    return 0;
}

int cmd_bench(const std::vector<std::string>& inputs, const ConfigOpts& opts, int warmup,
              const std::string& report_path) {
    const PipelineConfig cfg = resolve_config(opts);
    if (inputs.empty()) throw Error(ErrorCode::Bench, "empty");
    // Total time to generate field boundaries: raster load through polygons.
    const LatencyStats stats = bench(
        [&](const std::string& path) {
            const RasterPatch scene = read_raster(path);
            delineate_scene(scene, cfg);
        },
        inputs, warmup);
    nlohmann::ordered_json j;
    j["config"] = nlohmann::json::parse(cfg.to_json());
    j["latency_ms"] = {{"mean", stats.mean_ms},
                       {"p50", stats.p50_ms},
                       {"p95", stats.p95_ms},
                       {"samples", stats.samples}};
    if (!report_path.empty()) write_text(report_path, j.dump());
    std::cout << "latency_ms mean=" << stats.mean_ms << " p50=" << stats.p50_ms
              << " p95=" << stats.p95_ms << " (" << stats.samples << " samples)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Field-boundary delineation pipeline and evaluation toolkit"};
    app.require_subcommand(1);

    // delineate
    auto* delineate = app.add_subcommand("delineate", "raster(s) -> field-boundary GeoJSON");
    std::vector<std::string> del_inputs;
    std::string del_output, del_dump;
    ConfigOpts del_opts;
    delineate->add_option("inputs", del_inputs, "input PNG raster(s)")->required();
    delineate->add_option("-o,--output", del_output, "output GeoJSON path (or directory)");
    delineate->add_option("--dump-rlej", del_dump, "directory for per-tile .rlej debug dumps");
    add_config_flags(delineate, del_opts);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against a GT manifest");
    std::string ev_manifest, ev_pred_dir, ev_report;
    bool ev_boundary = false;
    ConfigOpts ev_opts;
    evaluate->add_option("manifest", ev_manifest, "GT manifest (JSON-lines)")->required();
    evaluate->add_option("preds", ev_pred_dir, "directory of prediction .rlej files")->required();
    evaluate->add_option("-o,--report", ev_report, "report JSON output path");
    evaluate->add_flag("--boundary-iou", ev_boundary, "also compute semantic boundary IoU");
    add_config_flags(evaluate, ev_opts);

    // rasterize
    auto* rasterize = app.add_subcommand("rasterize", "parcel GeoJSON -> instance .rlej");
    std::string ra_parcels, ra_out;
    double ra_ox = 0, ra_oy = 0, ra_ps = 1.0;
    int ra_epsg = 3857, ra_w = 0, ra_h = 0;
    rasterize->add_option("parcels", ra_parcels, "parcel GeoJSON FeatureCollection")->required();
    rasterize->add_option("-o,--output", ra_out, "output .rlej path")->required();
    rasterize->add_option("--origin-x", ra_ox)->required();
    rasterize->add_option("--origin-y", ra_oy)->required();
    rasterize->add_option("--pixel-size", ra_ps)->required();
    rasterize->add_option("--epsg", ra_epsg);
    rasterize->add_option("--width", ra_w)->required();
    rasterize->add_option("--height", ra_h)->required();

    // patches
    auto* patches = app.add_subcommand("patches", "extract annotated patches from a scene");
    std::string pa_scene, pa_ann, pa_out, pa_region;
    int pa_size = 512, pa_stride = 0, pa_min = 32;
    bool pa_keep_empty = false;
    patches->add_option("scene", pa_scene, "scene PNG")->required();
    patches->add_option("annotations", pa_ann, "scene .rlej annotations")->required();
    patches->add_option("-o,--output", pa_out, "output directory")->required();
    patches->add_option("--patch-size", pa_size);
    patches->add_option("--stride", pa_stride);
    patches->add_option("--min-field-px", pa_min);
    patches->add_flag("--keep-empty", pa_keep_empty);
    patches->add_option("--region", pa_region);

    // stats
    auto* stats = app.add_subcommand("stats", "dataset roll-up statistics");
    std::string st_manifest, st_report;
    stats->add_option("manifest", st_manifest)->required();
    stats->add_option("-o,--report", st_report);

    // split
    auto* split = app.add_subcommand("split", "spatial-block train/test split");
    std::string sp_manifest, sp_out;
    double sp_fraction = 0.05;
    std::uint64_t sp_seed = 0;
    int sp_block = 512;
    split->add_option("manifest", sp_manifest)->required();
    split->add_option("-o,--output", sp_out)->required();
    split->add_option("--test-fraction", sp_fraction);
    split->add_option("--seed", sp_seed);
    split->add_option("--block-px", sp_block);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "end-to-end latency harness");
    std::vector<std::string> be_inputs;
    std::string be_report;
    int be_warmup = 3;
    ConfigOpts be_opts;
    bench_cmd->add_option("inputs", be_inputs, "input PNG raster(s)");
    bench_cmd->add_option("--warmup", be_warmup, "warm-up runs to exclude");
    bench_cmd->add_option("-o,--report", be_report);
    add_config_flags(bench_cmd, be_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (delineate->parsed()) return cmd_delineate(del_inputs, del_opts, del_output, del_dump);
        if (evaluate->parsed())
            return cmd_evaluate(ev_manifest, ev_pred_dir, ev_opts, ev_report, ev_boundary);
        if (rasterize->parsed())
            return cmd_rasterize(ra_parcels, ra_out, ra_ox, ra_oy, ra_ps, ra_epsg, ra_w, ra_h);
        if (patches->parsed())
            return cmd_patches(pa_scene, pa_ann, pa_out, pa_size, pa_stride, pa_min,
                               pa_keep_empty, pa_region);
        if (stats->parsed()) return cmd_stats(st_manifest, st_report);
        if (split->parsed()) return cmd_split(sp_manifest, sp_out, sp_fraction, sp_seed, sp_block);
        if (bench_cmd->parsed()) return cmd_bench(be_inputs, be_opts, be_warmup, be_report);
    } catch (const Error& e) {
        std::cerr << "E:" << error_code_name(e.code()) << ":" << e.detail() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "E:INTERNAL:" << e.what() << "\n";
        return 1;
    }
    return 1;
}
