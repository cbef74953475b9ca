#include "fieldline/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fieldline/png_io.hpp"

namespace fieldline {

void manifest_write(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["image_path"] = e.image_path;
        j["annotation_path"] = e.annotation_path;
        j["resolution_m_per_px"] = e.resolution_m_per_px;
        j["region_tag"] = e.region_tag;
        j["split"] = e.split;
        out << j.dump() << "\n";
    }
}

std::vector<ManifestEntry> manifest_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Manifest, "cannot read " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.image_path = j.at("image_path").get<std::string>();
            e.annotation_path = j.at("annotation_path").get<std::string>();
            e.resolution_m_per_px = j.at("resolution_m_per_px").get<double>();
            e.region_tag = j.value("region_tag", "");
            e.split = j.value("split", "");
            if (e.resolution_m_per_px <= 0.0)
                throw Error(ErrorCode::Manifest, "resolution must be positive");
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::Manifest,
                        path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return entries;
}

namespace {

struct PixelRing {
    std::vector<Point> pts;  // closed, pixel coordinates
};

PixelRing to_pixel_ring(const Ring& ring, const GeoTransform& gt) {
    if (ring.size() < 4 || !(ring.front() == ring.back()))
        throw Error(ErrorCode::Ring, "open ring: parcel rings must be closed");
    PixelRing out;
    out.pts.reserve(ring.size());
    for (const auto& p : ring)
        out.pts.push_back({(p.x - gt.origin_x) / gt.pixel_size_x,
                           (gt.origin_y - p.y) / gt.pixel_size_y});
    return out;
}

// Even-odd scanline fill at pixel centers. The standard crossing rule
// ((y1 > py) != (y2 > py), fill while px in [x_even, x_odd)) is exactly the
// half-open top-left convention in image axes.
Bitmap fill_parcel(const std::vector<PixelRing>& rings, int width, int height) {
    Bitmap bm(width, height);
    std::vector<double> xs;
    for (int r = 0; r < height; ++r) {
        const double py = r + 0.5;
        xs.clear();
        for (const auto& ring : rings) {
            for (std::size_t i = 0; i + 1 < ring.pts.size(); ++i) {
                const double y1 = ring.pts[i].y, y2 = ring.pts[i + 1].y;
                if ((y1 > py) != (y2 > py)) {
                    const double x1 = ring.pts[i].x, x2 = ring.pts[i + 1].x;
                    xs.push_back(x1 + (py - y1) * (x2 - x1) / (y2 - y1));
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            int c0 = static_cast<int>(std::ceil(xs[k] - 0.5));
            int c1 = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1;
            c0 = std::max(c0, 0);
            c1 = std::min(c1, width - 1);
            for (int c = c0; c <= c1; ++c) bm.set(r, c);
        }
    }
    return bm;
}

}  // namespace

RasterizeResult rasterize_parcels(const std::vector<Parcel>& parcels, const GeoTransform& gt,
                                  int width, int height) {
    gt.validate();
    if (width < 1 || height < 1)
        throw Error(ErrorCode::Config, "raster extent must be at least 1x1");

    std::vector<Bitmap> bitmaps;
    std::vector<std::uint64_t> areas;
    for (const auto& parcel : parcels) {
        std::vector<PixelRing> rings;
        rings.push_back(to_pixel_ring(parcel.exterior, gt));
        for (const auto& h : parcel.holes) rings.push_back(to_pixel_ring(h, gt));
        Bitmap bm = fill_parcel(rings, width, height);
        std::uint64_t area = 0;
        for (auto v : bm.data) area += v;
        bitmaps.push_back(std::move(bm));
        areas.push_back(area);
    }

    // Overlap resolution: smallest standalone pixel area wins, ties to the
    // lower input index.
    std::vector<std::int32_t> owner(static_cast<std::size_t>(width) * height, -1);
    std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> conflicts;
    for (std::size_t k = 0; k < bitmaps.size(); ++k) {
        for (std::size_t i = 0; i < bitmaps[k].data.size(); ++i) {
            if (!bitmaps[k].data[i]) continue;
            const std::int32_t o = owner[i];
            if (o < 0) {
                owner[i] = static_cast<std::int32_t>(k);
            } else {
                ++conflicts[{static_cast<std::size_t>(o), k}];
                const std::size_t os = static_cast<std::size_t>(o);
                if (areas[k] < areas[os]) owner[i] = static_cast<std::int32_t>(k);
            }
        }
    }

    RasterizeResult result;
    for (const auto& [pair, px] : conflicts)
        result.warnings.push_back({pair.first, pair.second, px});

    for (std::size_t k = 0; k < bitmaps.size(); ++k) {
        Bitmap bm(width, height);
        std::uint64_t area = 0;
        for (std::size_t i = 0; i < bm.data.size(); ++i) {
            if (owner[i] == static_cast<std::int32_t>(k)) {
                bm.data[i] = 1;
                ++area;
            }
        }
        if (area > 0) {
            result.masks.push_back(rle_encode(bm));
            result.source_indices.push_back(k);
        }
    }
    return result;
}

std::vector<ExtractedPatch> extract_patches(const RasterPatch& scene,
                                            const std::vector<InstanceMask>& masks,
                                            const PatchExtractionConfig& cfg) {
    cfg.validate();
    scene.validate();
    for (const auto& m : masks)
        if (m.width != scene.width || m.height != scene.height)
            throw Error(ErrorCode::Shape, "mask does not match scene extent");

    const TileGrid grid = build_tile_grid(scene.width, scene.height, cfg.patch_size_px,
                                          cfg.patch_size_px - cfg.stride_px);
    std::vector<ExtractedPatch> out;
    for (const auto& tile : grid.tiles) {
        const PixelRect rect{tile.offset_x, tile.offset_y, tile.width, tile.height};
        DetectionSet anns;
        anns.width = rect.width;
        anns.height = rect.height;
        for (std::size_t k = 0; k < masks.size(); ++k) {
            InstanceMask clipped = mask_crop(masks[k], rect);
            if (clipped.area() >= static_cast<std::uint64_t>(cfg.min_field_px)) {
                FieldInstance inst;
                inst.id = static_cast<std::int64_t>(k);
                inst.mask = std::move(clipped);
                inst.score = 1.0;
                anns.instances.push_back(std::move(inst));
            }
        }
        if (anns.instances.empty() && cfg.drop_empty) continue;
        ExtractedPatch ep;
        ep.rect = rect;
        ep.patch = crop(scene, rect);
        ep.annotations = std::move(anns);
        out.push_back(std::move(ep));
    }
    return out;
}

DatasetStats dataset_stats(const std::vector<ManifestEntry>& entries) {
    DatasetStats stats;
    std::uint64_t ok = 0;
    for (const auto& e : entries) {
        std::uint64_t n = 0;
        try {
            const RleFile f = rlej_read(e.annotation_path);
            n = f.instances.size();
        } catch (const Error& err) {
            stats.entry_errors.push_back(e.annotation_path + ": " + err.detail());
            continue;
        }
        ++ok;
        ++stats.image_count;
        stats.instance_count += n;
        ++stats.images_per_resolution[e.resolution_m_per_px];
        if (n < 10) ++stats.field_histogram[0];
        else if (n < 50) ++stats.field_histogram[1];
        else if (n < 100) ++stats.field_histogram[2];
        else if (n < 300) ++stats.field_histogram[3];
        else ++stats.field_histogram[4];
    }
    stats.completeness =
        entries.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(entries.size());
    return stats;
}

std::string DatasetStats::to_json() const {
    nlohmann::ordered_json j;
    j["image_count"] = image_count;
    j["instance_count"] = instance_count;
    j["images_per_resolution"] = nlohmann::ordered_json::array();
    for (const auto& [res, n] : images_per_resolution)
        j["images_per_resolution"].push_back({{"resolution_m_per_px", res}, {"images", n}});
    j["field_histogram"] = {{"<10", field_histogram[0]},
                            {"10-49", field_histogram[1]},
                            {"50-99", field_histogram[2]},
                            {"100-299", field_histogram[3]},
                            {">=300", field_histogram[4]}};
    j["completeness"] = completeness;
    if (!entry_errors.empty()) j["entry_errors"] = entry_errors;
    return j.dump();
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ull ^ (seed * 0x9e3779b97f4a7c15ull);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

SplitResult split_manifest(const std::vector<ManifestEntry>& entries, double test_fraction,
                           std::uint64_t seed, int block_px) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw Error(ErrorCode::Config, "test fraction must be in (0,1)");
    if (block_px < 1)
        throw Error(ErrorCode::Config, "block_px must be >= 1");

    // Block key from the quantized geo origin; entries without a sidecar
    // fall back to a per-path block.
    auto block_key = [&](const ManifestEntry& e) -> std::string {
        const std::string sc = sidecar_path(e.image_path);
        if (std::filesystem::exists(sc)) {
            try {
                std::ifstream in(sc);
                std::ostringstream ss;
                ss << in.rdbuf();
                auto j = nlohmann::json::parse(ss.str());
                const double block_units = block_px * e.resolution_m_per_px;
                const auto qx = static_cast<std::int64_t>(
                    std::floor(j.at("origin_x").get<double>() / block_units));
                const auto qy = static_cast<std::int64_t>(
                    std::floor(j.at("origin_y").get<double>() / block_units));
                return e.region_tag + ":" + std::to_string(qx) + ":" + std::to_string(qy);
            } catch (const nlohmann::json::exception&) {
                // fall through to path key
            }
        }
        return "path:" + e.image_path;
    };

    std::map<std::string, std::vector<std::size_t>> blocks;
    for (std::size_t i = 0; i < entries.size(); ++i)
        blocks[block_key(entries[i])].push_back(i);

    struct BlockRef {
        std::uint64_t hash;
        const std::string* key;
        const std::vector<std::size_t>* members;
    };
    std::vector<BlockRef> order;
    for (const auto& [key, members] : blocks)
        order.push_back({fnv1a(key, seed), &key, &members});
    std::sort(order.begin(), order.end(), [](const BlockRef& a, const BlockRef& b) {
        if (a.hash != b.hash) return a.hash < b.hash;
        return *a.key < *b.key;
    });

    SplitResult result;
    result.entries = entries;
    const double target = test_fraction * static_cast<double>(entries.size());
    std::uint64_t assigned = 0;
    for (const auto& b : order) {
        const bool to_test = static_cast<double>(assigned) < target;
        for (std::size_t i : *b.members)
            result.entries[i].split = to_test ? "test" : "train";
        if (to_test) assigned += b.members->size();
    }
    if (blocks.size() == 1 && !entries.empty())
        result.warnings.push_back(
            "all entries fall in a single spatial block; the whole dataset lands in one split");
    return result;
}

}  // namespace fieldline
