#include "fieldline/vector.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

namespace fieldline {

double ring_signed_area(const Ring& ring) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
        acc += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
    return acc / 2.0;
}

namespace {

// Directed boundary edge along pixel cracks. Directions: 0:+x 1:+y 2:-x 3:-y.
struct CrackEdge {
    int x, y;  // start corner
    int dir;
    bool used = false;
};

int end_x(const CrackEdge& e) { return e.x + (e.dir == 0 ? 1 : e.dir == 2 ? -1 : 0); }
int end_y(const CrackEdge& e) { return e.y + (e.dir == 1 ? 1 : e.dir == 3 ? -1 : 0); }

// Traces all crack cycles of a single bitmap. Foreground stays on the right
// of travel; ambiguous corners resolve by the right turn, which keeps
// diagonally-touching regions separate.
std::vector<Ring> trace_bitmap(const Bitmap& bm) {
    const int w = bm.width, h = bm.height;
    auto fg = [&](int r, int c) {
        return r >= 0 && r < h && c >= 0 && c < w && bm.at(r, c) != 0;
    };

    std::vector<CrackEdge> edges;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!bm.at(r, c)) continue;
            if (!fg(r - 1, c)) edges.push_back({c, r, 0});
            if (!fg(r, c + 1)) edges.push_back({c + 1, r, 1});
            if (!fg(r + 1, c)) edges.push_back({c + 1, r + 1, 2});
            if (!fg(r, c - 1)) edges.push_back({c, r + 1, 3});
        }
    }

    // start vertex -> outgoing edge indices (at most two).
    std::map<std::pair<int, int>, std::vector<int>> outgoing;
    for (std::size_t i = 0; i < edges.size(); ++i)
        outgoing[{edges[i].x, edges[i].y}].push_back(static_cast<int>(i));

    std::vector<Ring> rings;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (edges[start].used) continue;
        Ring ring;
        int cur = static_cast<int>(start);
        while (!edges[cur].used) {
            edges[cur].used = true;
            ring.push_back({static_cast<double>(edges[cur].x), static_cast<double>(edges[cur].y)});
            const int vx = end_x(edges[cur]), vy = end_y(edges[cur]);
            const auto& outs = outgoing[{vx, vy}];
            int next = -1;
            if (outs.size() == 1) {
                next = outs[0];
            } else {
                const int right = (edges[cur].dir + 1) & 3;
                for (int cand : outs)
                    if (edges[cand].dir == right) next = cand;
                if (next < 0)
                    for (int cand : outs)
                        if (!edges[cand].used) next = cand;
            }
            cur = next;
        }
        // Drop collinear intermediate vertices (consecutive same-direction
        // cracks), including across the closure.
        Ring cleaned;
        const std::size_t n = ring.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& prev = ring[(i + n - 1) % n];
            const Point& curp = ring[i];
            const Point& nextp = ring[(i + 1) % n];
            const double cross = (curp.x - prev.x) * (nextp.y - curp.y) -
                                 (nextp.x - curp.x) * (curp.y - prev.y);
            if (cross != 0.0) cleaned.push_back(curp);
        }
        cleaned.push_back(cleaned.front());
        rings.push_back(std::move(cleaned));
    }
    return rings;
}

}  // namespace

std::vector<ContourSet> trace_contours(const InstanceMask& mask) {
    if (mask.area() == 0)
        throw Error(ErrorCode::Empty, "cannot trace an empty mask");
    const Bitmap bm = rle_decode(mask);
    std::vector<ContourSet> out;
    for (const auto& comp : connected_components(bm, 4)) {
        ContourSet cs;
        for (auto& ring : trace_bitmap(rle_decode(comp))) {
            if (ring_signed_area(ring) > 0.0) cs.exterior = std::move(ring);
            else cs.holes.push_back(std::move(ring));
        }
        out.push_back(std::move(cs));
    }
    return out;
}

namespace {

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Open polyline Douglas-Peucker; appends all vertices except the final one.
void dp_arc(const std::vector<Point>& pts, std::size_t lo, std::size_t hi, double tol,
            std::vector<Point>& out) {
    if (hi <= lo + 1) {
        out.push_back(pts[lo]);
        return;
    }
    double dmax = -1.0;
    std::size_t split = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        const double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
        if (d > dmax) {
            dmax = d;
            split = i;
        }
    }
    if (dmax > tol) {
        dp_arc(pts, lo, split, tol, out);
        dp_arc(pts, split, hi, tol, out);
    } else {
        out.push_back(pts[lo]);
    }
}

}  // namespace

Ring simplify(const Ring& ring, double tolerance) {
    if (ring.size() < 4 || !(ring.front() == ring.back()))
        throw Error(ErrorCode::Ring, "ring must be closed with at least 4 vertices");
    if (tolerance < 0.0)
        throw Error(ErrorCode::Config, "tolerance must be >= 0");
    if (tolerance == 0.0) return ring;

    std::vector<Point> pts(ring.begin(), ring.end() - 1);
    const std::size_t n = pts.size();
    if (n <= 3) return ring;

    // Anchor at the two mutually farthest vertices.
    std::size_t ai = 0, aj = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
            const double d = dx * dx + dy * dy;
            if (d > best) {
                best = d;
                ai = i;
                aj = j;
            }
        }
    }

    // Rotate so the ring starts at the first anchor; the second anchor lands
    // at index aj - ai.
    std::vector<Point> rot(n);
    for (std::size_t i = 0; i < n; ++i) rot[i] = pts[(ai + i) % n];
    const std::size_t mid = aj - ai;

    std::vector<Point> result;
    dp_arc(rot, 0, mid, tolerance, result);
    std::vector<Point> wrapped(rot.begin() + mid, rot.end());
    wrapped.push_back(rot[0]);
    dp_arc(wrapped, 0, wrapped.size() - 1, tolerance, result);

    if (result.size() < 3) {
        // Degenerate collapse to the two anchors: retain the farthest
        // off-chord vertex to keep a valid ring.
        double dmax = -1.0;
        std::size_t keep = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0 || i == mid) continue;
            const double d = point_segment_distance(rot[i], rot[0], rot[mid]);
            if (d > dmax) {
                dmax = d;
                keep = i;
            }
        }
        result.clear();
        std::vector<std::size_t> idx = {0, std::min(keep, mid), std::max(keep, mid)};
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        for (std::size_t i : idx) result.push_back(rot[i]);
    }

    result.push_back(result.front());
    return result;
}

PolygonizeResult to_field_polygons(const DetectionSet& dets,
                                   const std::optional<GeoTransform>& gt,
                                   double tolerance_px) {
    PolygonizeResult out;
    for (const auto& inst : dets.instances) {
        if (inst.mask.area() == 0) {
            out.warnings.push_back("instance " + std::to_string(inst.id) +
                                   " has zero area; skipped");
            continue;
        }
        for (const auto& cs : trace_contours(inst.mask)) {
            Ring ext = simplify(cs.exterior, tolerance_px);
            std::vector<Ring> holes;
            double net_px = ring_signed_area(ext);
            for (const auto& hole : cs.holes) {
                Ring sh = simplify(hole, tolerance_px);
                net_px -= std::abs(ring_signed_area(sh));
                holes.push_back(std::move(sh));
            }

            FieldPolygon poly;
            poly.source_id = inst.id;
            poly.score = inst.score;
            const double px_area = gt ? gt->pixel_size_x * gt->pixel_size_y : 1.0;
            poly.area = net_px * px_area;
            auto map_ring = [&](const Ring& r) {
                if (!gt) return r;
                Ring g;
                g.reserve(r.size());
                for (const auto& p : r) {
                    auto [x, y] = corner_to_geo(*gt, p.x, p.y);
                    g.push_back({x, y});
                }
                return g;
            };
            poly.exterior = map_ring(ext);
            for (const auto& h : holes) poly.holes.push_back(map_ring(h));
            out.polygons.push_back(std::move(poly));
        }
    }
    return out;
}

std::string polygons_to_geojson(const std::vector<FieldPolygon>& polygons,
                                const std::optional<GeoTransform>& gt,
                                const std::string& pipeline_config) {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    if (gt) {
        fc["crs"] = {{"type", "name"},
                     {"properties",
                      {{"name", "urn:ogc:def:crs:EPSG::" + std::to_string(gt->crs_code)}}}};
    } else {
        fc["crs_note"] = "pixel";
    }
    if (!pipeline_config.empty())
        fc["pipeline"] = nlohmann::json::parse(pipeline_config);
    fc["features"] = nlohmann::ordered_json::array();
    for (const auto& poly : polygons) {
        nlohmann::ordered_json feat;
        feat["type"] = "Feature";
        feat["properties"] = {{"id", poly.source_id}, {"score", poly.score},
                              {"area_m2", poly.area}};
        auto ring_json = [](const Ring& r) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& p : r) arr.push_back({p.x, p.y});
            return arr;
        };
        nlohmann::ordered_json coords = nlohmann::ordered_json::array();
        coords.push_back(ring_json(poly.exterior));
        for (const auto& h : poly.holes) coords.push_back(ring_json(h));
        feat["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(coords)}};
        fc["features"].push_back(std::move(feat));
    }
    return fc.dump();
}

}  // namespace fieldline
