#include "fieldline/stitch.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace fieldline {

DetectionSet globalize(const DetectionSet& dets, int tile_index, int offset_x, int offset_y,
                       int scene_width, int scene_height) {
    if (offset_x < 0 || offset_y < 0 || offset_x + dets.width > scene_width ||
        offset_y + dets.height > scene_height)
        throw Error(ErrorCode::Bounds, "tile overruns scene extent");
    DetectionSet out;
    out.width = scene_width;
    out.height = scene_height;
    std::int64_t local = 0;
    for (const auto& inst : dets.instances) {
        FieldInstance g;
        g.id = static_cast<std::int64_t>(tile_index) * kTileIdStride + local++;
        g.score = inst.score;
        g.mask = mask_embed(inst.mask, offset_x, offset_y, scene_width, scene_height);
        out.instances.push_back(std::move(g));
    }
    return out;
}

namespace {

struct Entry {
    std::int64_t id;
    int tile_index;
    double score;
    InstanceMask mask;
    std::uint64_t area;
    PixelRect bbox;
};

bool rects_overlap(const PixelRect& a, const PixelRect& b) {
    return a.x < b.x + b.width && b.x < a.x + a.width && a.y < b.y + b.height &&
           b.y < a.y + a.height;
}

PixelRect rect_intersection(const Tile& a, const Tile& b) {
    const int x0 = std::max(a.offset_x, b.offset_x);
    const int y0 = std::max(a.offset_y, b.offset_y);
    const int x1 = std::min(a.offset_x + a.width, b.offset_x + b.width);
    const int y1 = std::min(a.offset_y + a.height, b.offset_y + b.height);
    return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

StitchResult stitch(const std::vector<TileDetections>& all_dets, const TileGrid& grid,
                    const StitchConfig& cfg) {
    cfg.validate();

    std::vector<Entry> entries;
    int scene_w = -1, scene_h = -1;
    for (const auto& td : all_dets) {
        if (scene_w < 0) {
            scene_w = td.dets.width;
            scene_h = td.dets.height;
        } else if (td.dets.width != scene_w || td.dets.height != scene_h) {
            throw Error(ErrorCode::Shape, "mixed scene dimensions across tiles");
        }
        for (const auto& inst : td.dets.instances) {
            Entry e;
            e.id = inst.id;
            e.tile_index = td.tile_index;
            e.score = inst.score;
            e.mask = inst.mask;
            e.area = inst.mask.area();
            e.bbox = mask_bbox(inst.mask);
            entries.push_back(std::move(e));
        }
    }
    StitchResult result;
    result.dets.width = std::max(scene_w, 0);
    result.dets.height = std::max(scene_h, 0);
    if (entries.empty()) return result;

    // Canonical order before anything else: output must not depend on the
    // order tiles were processed in.
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });

    std::map<int, Tile> tiles_by_index;
    for (const auto& t : grid.tiles) tiles_by_index[t.index] = t;

    const int n = static_cast<int>(entries.size());
    UnionFind uf(n);

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Entry& a = entries[i];
            const Entry& b = entries[j];
            if (!rects_overlap(a.bbox, b.bbox)) continue;
            const std::uint64_t inter = rle_intersection_area(a.mask, b.mask);

            // Nested duplicates regardless of tile provenance.
            const std::uint64_t smaller = std::min(a.area, b.area);
            if (smaller > 0 &&
                static_cast<double>(inter) / static_cast<double>(smaller) >= cfg.containment_min) {
                uf.unite(i, j);
                continue;
            }

            // Seam agreement inside the shared strip of the two tiles.
            if (a.tile_index == b.tile_index) continue;
            auto ta = tiles_by_index.find(a.tile_index);
            auto tb = tiles_by_index.find(b.tile_index);
            if (ta == tiles_by_index.end() || tb == tiles_by_index.end()) continue;
            const PixelRect strip = rect_intersection(ta->second, tb->second);
            if (strip.width <= 0 || strip.height <= 0) continue;

            const InstanceMask a_strip = mask_intersect_rect(a.mask, strip);
            const std::uint64_t a_in = a_strip.area();
            if (a_in == 0) continue;
            const InstanceMask b_strip = mask_intersect_rect(b.mask, strip);
            const std::uint64_t b_in = b_strip.area();
            if (b_in == 0) continue;
            const std::uint64_t both = rle_intersection_area(a_strip, b_strip);
            const double agreement =
                static_cast<double>(both) / static_cast<double>(std::min(a_in, b_in));
            if (agreement >= cfg.strip_agreement_min) uf.unite(i, j);
        }
    }

    // Materialize groups: mask union, max score, min id.
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

    struct Merged {
        std::int64_t id;
        double score;
        InstanceMask mask;
        std::uint64_t area;
        std::set<int> tiles;
    };
    std::vector<Merged> merged;
    for (const auto& [root, members] : groups) {
        Merged m;
        m.id = entries[members.front()].id;
        m.score = 0.0;
        std::vector<InstanceMask> masks;
        for (int i : members) {
            m.id = std::min(m.id, entries[i].id);
            m.score = std::max(m.score, entries[i].score);
            m.tiles.insert(entries[i].tile_index);
            masks.push_back(entries[i].mask);
        }
        m.mask = masks.size() == 1 ? masks[0] : mask_union(masks);
        m.area = m.mask.area();
        if (m.tiles.size() >= 3)
            result.warnings.push_back("instance " + std::to_string(m.id) + " spans " +
                                      std::to_string(m.tiles.size()) +
                                      " tiles; fields wider than a tile may fragment");
        merged.push_back(std::move(m));
    }

    std::sort(merged.begin(), merged.end(), [](const Merged& a, const Merged& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.area != b.area) return a.area > b.area;
        return a.id < b.id;
    });

    // Greedy suppression.
    std::vector<const Merged*> kept;
    for (const auto& m : merged) {
        bool suppressed = false;
        for (const Merged* k : kept) {
            if (mask_iou(m.mask, k->mask) >= cfg.nms_iou_max) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(&m);
    }

    for (const Merged* k : kept) {
        FieldInstance inst;
        inst.id = k->id;
        inst.score = k->score;
        inst.mask = k->mask;
        result.dets.instances.push_back(std::move(inst));
    }
    return result;
}

}  // namespace fieldline
