#include "fieldline/mask.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace fieldline {

void InstanceMask::validate() const {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::Rle, "mask extent must be at least 1x1");
    if (counts.empty())
        throw Error(ErrorCode::Rle, "empty counts");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0 && i != 0)
            throw Error(ErrorCode::Rle, "interior zero run at position " + std::to_string(i));
        total += counts[i];
    }
    if (total != static_cast<std::uint64_t>(width) * height)
        throw Error(ErrorCode::Rle, "counts sum " + std::to_string(total) +
                                        " does not match extent " +
                                        std::to_string(static_cast<std::uint64_t>(width) * height));
}

InstanceMask rle_encode(const Bitmap& bitmap) {
    if (bitmap.width < 1 || bitmap.height < 1)
        throw Error(ErrorCode::Rle, "bitmap extent must be at least 1x1");
    InstanceMask mask;
    mask.width = bitmap.width;
    mask.height = bitmap.height;
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (int col = 0; col < bitmap.width; ++col) {
        for (int row = 0; row < bitmap.height; ++row) {
            std::uint8_t v = bitmap.at(row, col) ? 1 : 0;
            if (v == current) {
                ++run;
            } else {
                mask.counts.push_back(run);
                current = v;
                run = 1;
            }
        }
    }
    mask.counts.push_back(run);
    return mask;
}

Bitmap rle_decode(const InstanceMask& mask) {
    mask.validate();
    Bitmap bitmap(mask.width, mask.height);
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < mask.counts.size(); ++i) {
        const bool fg = (i % 2) == 1;
        for (std::uint32_t k = 0; k < mask.counts[i]; ++k, ++pos) {
            if (fg) {
                const int col = static_cast<int>(pos / mask.height);
                const int row = static_cast<int>(pos % mask.height);
                bitmap.set(row, col);
            }
        }
    }
    return bitmap;
}

std::uint64_t rle_intersection_area(const InstanceMask& a, const InstanceMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(ErrorCode::Shape, "mask dimensions differ");
    std::uint64_t inter = 0;
    std::size_t ia = 0, ib = 0;
    std::uint64_t ea = a.counts.empty() ? 0 : a.counts[0];
    std::uint64_t eb = b.counts.empty() ? 0 : b.counts[0];
    std::uint64_t pos = 0;
    const std::uint64_t total = static_cast<std::uint64_t>(a.width) * a.height;
    while (pos < total && ia < a.counts.size() && ib < b.counts.size()) {
        const std::uint64_t e = std::min(ea, eb);
        if ((ia % 2) == 1 && (ib % 2) == 1) inter += e - pos;
        pos = e;
        if (ea == e) {
            ++ia;
            if (ia < a.counts.size()) ea += a.counts[ia];
        }
        if (eb == e) {
            ++ib;
            if (ib < b.counts.size()) eb += b.counts[ib];
        }
    }
    return inter;
}

double mask_iou(const InstanceMask& a, const InstanceMask& b) {
    const std::uint64_t inter = rle_intersection_area(a, b);
    const std::uint64_t uni = a.area() + b.area() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

Bitmap erode4(const Bitmap& src) {
    Bitmap out(src.width, src.height);
    for (int r = 0; r < src.height; ++r) {
        for (int c = 0; c < src.width; ++c) {
            if (!src.at(r, c)) continue;
            const bool keep = r > 0 && src.at(r - 1, c) && r + 1 < src.height &&
                              src.at(r + 1, c) && c > 0 && src.at(r, c - 1) &&
                              c + 1 < src.width && src.at(r, c + 1);
            if (keep) out.set(r, c);
        }
    }
    return out;
}

}  // namespace

InstanceMask boundary_band(const InstanceMask& mask, int thickness) {
    if (thickness < 1)
        throw Error(ErrorCode::Config, "boundary thickness must be >= 1");
    Bitmap src = rle_decode(mask);
    Bitmap eroded = src;
    for (int i = 0; i < thickness; ++i) eroded = erode4(eroded);
    Bitmap band(src.width, src.height);
    for (std::size_t i = 0; i < src.data.size(); ++i)
        band.data[i] = src.data[i] && !eroded.data[i];
    return rle_encode(band);
}

std::vector<InstanceMask> connected_components(const Bitmap& bitmap, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw Error(ErrorCode::Config, "connectivity must be 4 or 8");
    const int w = bitmap.width, h = bitmap.height;
    std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<InstanceMask> out;
    std::vector<std::pair<int, int>> stack;

    static const int dx4[] = {1, -1, 0, 0};
    static const int dy4[] = {0, 0, 1, -1};
    static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
    static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int* dx = connectivity == 4 ? dx4 : dx8;
    const int* dy = connectivity == 4 ? dy4 : dy8;
    const int ndirs = connectivity;

    std::int32_t next = 0;
    // Column-major scan so component order matches the minimum column-major
    // linear index.
    for (int col = 0; col < w; ++col) {
        for (int row = 0; row < h; ++row) {
            const std::size_t idx = static_cast<std::size_t>(row) * w + col;
            if (!bitmap.data[idx] || label[idx] >= 0) continue;
            Bitmap comp(w, h);
            stack.clear();
            stack.emplace_back(row, col);
            label[idx] = next;
            while (!stack.empty()) {
                auto [r, c] = stack.back();
                stack.pop_back();
                comp.set(r, c);
                for (int d = 0; d < ndirs; ++d) {
                    const int nr = r + dy[d], nc = c + dx[d];
                    if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                    const std::size_t nidx = static_cast<std::size_t>(nr) * w + nc;
                    if (bitmap.data[nidx] && label[nidx] < 0) {
                        label[nidx] = next;
                        stack.emplace_back(nr, nc);
                    }
                }
            }
            out.push_back(rle_encode(comp));
            ++next;
        }
    }
    return out;
}

InstanceMask mask_union(const std::vector<InstanceMask>& masks) {
    if (masks.empty())
        throw Error(ErrorCode::Config, "union of zero masks");
    const int w = masks[0].width, h = masks[0].height;
    Bitmap acc(w, h);
    for (const auto& m : masks) {
        if (m.width != w || m.height != h)
            throw Error(ErrorCode::Shape, "mask dimensions differ in union");
        std::uint64_t pos = 0;
        for (std::size_t i = 0; i < m.counts.size(); ++i) {
            if (i % 2 == 1) {
                for (std::uint32_t k = 0; k < m.counts[i]; ++k) {
                    const std::uint64_t p = pos + k;
                    acc.data[static_cast<std::size_t>(p % h) * w + p / h] = 1;
                }
            }
            pos += m.counts[i];
        }
    }
    return rle_encode(acc);
}

namespace {

// Foreground intervals in column-major linear space, sorted by start.
std::vector<std::pair<std::uint64_t, std::uint64_t>> fg_intervals(const InstanceMask& m) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < m.counts.size(); ++i) {
        if (i % 2 == 1 && m.counts[i] > 0) out.emplace_back(pos, m.counts[i]);
        pos += m.counts[i];
    }
    return out;
}

InstanceMask intervals_to_mask(int width, int height,
                               std::vector<std::pair<std::uint64_t, std::uint64_t>> iv) {
    // Coalesce touching intervals; input is sorted by start.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> merged;
    for (const auto& [start, len] : iv) {
        if (!merged.empty() && merged.back().first + merged.back().second >= start) {
            const std::uint64_t end = std::max(merged.back().first + merged.back().second,
                                               start + len);
            merged.back().second = end - merged.back().first;
        } else {
            merged.emplace_back(start, len);
        }
    }
    InstanceMask out;
    out.width = width;
    out.height = height;
    const std::uint64_t total = static_cast<std::uint64_t>(width) * height;
    std::uint64_t pos = 0;
    for (const auto& [start, len] : merged) {
        out.counts.push_back(static_cast<std::uint32_t>(start - pos));
        out.counts.push_back(static_cast<std::uint32_t>(len));
        pos = start + len;
    }
    if (out.counts.empty()) out.counts.push_back(static_cast<std::uint32_t>(total));
    else if (pos < total) out.counts.push_back(static_cast<std::uint32_t>(total - pos));
    return out;
}

}  // namespace

InstanceMask mask_intersect_rect(const InstanceMask& mask, const PixelRect& rect) {
    mask.validate();
    const int h = mask.height;
    const int r0 = std::max(0, rect.y), r1 = std::min(mask.height, rect.y + rect.height);
    const int c0 = std::max(0, rect.x), c1 = std::min(mask.width, rect.x + rect.width);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& [start, len] : fg_intervals(mask)) {
        // A column-major run may span several columns; clip per column.
        std::uint64_t s = start;
        const std::uint64_t e = start + len;
        while (s < e) {
            const std::uint64_t col = s / h;
            const std::uint64_t col_end = std::min(e, (col + 1) * h);
            if (static_cast<int>(col) >= c0 && static_cast<int>(col) < c1) {
                const std::uint64_t lo = std::max(s, col * h + r0);
                const std::uint64_t hi = std::min(col_end, col * h + r1);
                if (lo < hi) out.emplace_back(lo, hi - lo);
            }
            s = col_end;
        }
    }
    return intervals_to_mask(mask.width, mask.height, out);
}

InstanceMask mask_crop(const InstanceMask& mask, const PixelRect& rect) {
    mask.validate();
    if (rect.x < 0 || rect.y < 0 || rect.width < 1 || rect.height < 1 ||
        rect.x + rect.width > mask.width || rect.y + rect.height > mask.height)
        throw Error(ErrorCode::Bounds, "crop rect outside mask extent");
    const int h = mask.height;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& [start, len] : fg_intervals(mask)) {
        std::uint64_t s = start;
        const std::uint64_t e = start + len;
        while (s < e) {
            const std::uint64_t col = s / h;
            const std::uint64_t col_end = std::min(e, (col + 1) * h);
            const int c = static_cast<int>(col);
            if (c >= rect.x && c < rect.x + rect.width) {
                const std::uint64_t lo = std::max(s, col * h + rect.y);
                const std::uint64_t hi = std::min(col_end, col * h + rect.y + rect.height);
                if (lo < hi) {
                    const std::uint64_t local_col = col - rect.x;
                    const std::uint64_t local_row = (lo - col * h) - rect.y;
                    out.emplace_back(local_col * rect.height + local_row, hi - lo);
                }
            }
            s = col_end;
        }
    }
    return intervals_to_mask(rect.width, rect.height, out);
}

InstanceMask mask_embed(const InstanceMask& mask, int offset_x, int offset_y,
                        int scene_width, int scene_height) {
    mask.validate();
    if (offset_x < 0 || offset_y < 0 || offset_x + mask.width > scene_width ||
        offset_y + mask.height > scene_height)
        throw Error(ErrorCode::Bounds, "tile overruns scene extent");
    const int h = mask.height;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& [start, len] : fg_intervals(mask)) {
        std::uint64_t s = start;
        const std::uint64_t e = start + len;
        while (s < e) {
            const std::uint64_t col = s / h;
            const std::uint64_t col_end = std::min(e, (col + 1) * h);
            const std::uint64_t row = s - col * h;
            const std::uint64_t scene_start =
                (col + offset_x) * static_cast<std::uint64_t>(scene_height) + row + offset_y;
            out.emplace_back(scene_start, col_end - s);
            s = col_end;
        }
    }
    return intervals_to_mask(scene_width, scene_height, out);
}

PixelRect mask_bbox(const InstanceMask& mask) {
    int min_r = mask.height, max_r = -1, min_c = mask.width, max_c = -1;
    const int h = mask.height;
    for (const auto& [start, len] : fg_intervals(mask)) {
        std::uint64_t s = start;
        const std::uint64_t e = start + len;
        while (s < e) {
            const int col = static_cast<int>(s / h);
            const std::uint64_t col_end = std::min(e, static_cast<std::uint64_t>(col + 1) * h);
            const int r0 = static_cast<int>(s - static_cast<std::uint64_t>(col) * h);
            const int r1 = static_cast<int>(col_end - 1 - static_cast<std::uint64_t>(col) * h);
            min_c = std::min(min_c, col);
            max_c = std::max(max_c, col);
            min_r = std::min(min_r, r0);
            max_r = std::max(max_r, r1);
            s = col_end;
        }
    }
    if (max_r < 0) return {0, 0, 0, 0};
    return {min_c, min_r, max_c - min_c + 1, max_r - min_r + 1};
}

// ---- .rlej -------------------------------------------------------------

std::string rlej_serialize(const RleFile& file) {
    nlohmann::ordered_json j;
    j["width"] = file.width;
    j["height"] = file.height;
    j["instances"] = nlohmann::ordered_json::array();
    for (const auto& rec : file.instances) {
        nlohmann::ordered_json e;
        e["id"] = rec.id;
        if (rec.has_score) e["score"] = rec.score;
        else e["score"] = nullptr;
        e["counts"] = rec.mask.counts;
        j["instances"].push_back(std::move(e));
    }
    return j.dump();
}

RleFile rlej_parse(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Rle, std::string("invalid JSON: ") + e.what());
    }
    RleFile file;
    try {
        file.width = j.at("width").get<int>();
        file.height = j.at("height").get<int>();
        for (const auto& e : j.at("instances")) {
            RleRecord rec;
            rec.id = e.at("id").get<std::int64_t>();
            if (e.contains("score") && !e.at("score").is_null()) {
                rec.has_score = true;
                rec.score = e.at("score").get<double>();
            }
            rec.mask.width = file.width;
            rec.mask.height = file.height;
            rec.mask.counts = e.at("counts").get<std::vector<std::uint32_t>>();
            rec.mask.validate();
            file.instances.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Rle, std::string("malformed .rlej: ") + e.what());
    }
    return file;
}

void rlej_write(const RleFile& file, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << rlej_serialize(file);
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

RleFile rlej_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return rlej_parse(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

}  // namespace fieldline
