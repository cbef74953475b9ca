#include "fieldline/backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace fieldline {

void DetectionSet::validate() const {
    std::set<std::int64_t> ids;
    for (const auto& inst : instances) {
        if (inst.mask.width != width || inst.mask.height != height)
            throw Error(ErrorCode::Shape, "instance mask does not match set extent");
        inst.validate();
        if (!ids.insert(inst.id).second)
            throw Error(ErrorCode::Config, "duplicate instance id " + std::to_string(inst.id));
    }
}

namespace {

std::vector<float> luminance(const RasterPatch& patch) {
    std::vector<float> lum(static_cast<std::size_t>(patch.width) * patch.height);
    const int b = patch.bands;
    for (std::size_t i = 0; i < lum.size(); ++i) {
        int sum = 0;
        for (int k = 0; k < b; ++k) sum += patch.pixels[i * b + k];
        lum[i] = static_cast<float>(sum) / static_cast<float>(b);
    }
    return lum;
}

// 3x3 Sobel magnitude with replicated borders.
std::vector<float> sobel_magnitude(const std::vector<float>& lum, int w, int h) {
    std::vector<float> mag(lum.size());
    auto at = [&](int r, int c) {
        r = std::clamp(r, 0, h - 1);
        c = std::clamp(c, 0, w - 1);
        return lum[static_cast<std::size_t>(r) * w + c];
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const float gx = (at(r - 1, c + 1) + 2.0f * at(r, c + 1) + at(r + 1, c + 1)) -
                             (at(r - 1, c - 1) + 2.0f * at(r, c - 1) + at(r + 1, c - 1));
            const float gy = (at(r + 1, c - 1) + 2.0f * at(r + 1, c) + at(r + 1, c + 1)) -
                             (at(r - 1, c - 1) + 2.0f * at(r - 1, c) + at(r - 1, c + 1));
            mag[static_cast<std::size_t>(r) * w + c] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return mag;
}

// Otsu over a 256-bin histogram of values in [0,1]; returns the threshold as
// a value in [0,1] (edge pixels are those with gradient >= threshold).
double otsu_threshold(const std::vector<float>& values) {
    std::array<std::uint64_t, 256> hist{};
    for (float v : values) {
        int bin = static_cast<int>(v * 256.0f);
        bin = std::clamp(bin, 0, 255);
        ++hist[bin];
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * static_cast<double>(hist[i]);

    double best_var = -1.0;
    int best_k = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int k = 0; k < 255; ++k) {
        w0 += static_cast<double>(hist[k]);
        sum0 += k * static_cast<double>(hist[k]);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    return (best_k + 1) / 256.0;
}

}  // namespace

DetectionSet baseline_edge_watershed(const RasterPatch& patch, const BaselineConfig& cfg) {
    patch.validate();
    cfg.validate();
    const int w = patch.width, h = patch.height;

    const auto lum = luminance(patch);
    auto grad = sobel_magnitude(lum, w, h);
    const float max_g = *std::max_element(grad.begin(), grad.end());

    DetectionSet out;
    out.width = w;
    out.height = h;

    if (max_g == 0.0f) {
        // Flat image: one instance covering the extent, score 1.
        Bitmap full(w, h);
        std::fill(full.data.begin(), full.data.end(), 1);
        FieldInstance inst;
        inst.id = 0;
        inst.mask = rle_encode(full);
        inst.score = 1.0;
        out.instances.push_back(std::move(inst));
        return out;
    }

    for (auto& g : grad) g /= max_g;

    const double thr = cfg.use_otsu ? otsu_threshold(grad) : cfg.fixed_threshold;

    Bitmap non_edge(w, h);
    for (std::size_t i = 0; i < grad.size(); ++i) non_edge.data[i] = grad[i] < thr ? 1 : 0;

    auto components = connected_components(non_edge, 4);
    std::vector<Bitmap> kept;
    for (auto& comp : components) {
        if (comp.area() >= static_cast<std::uint64_t>(cfg.min_area_px))
            kept.push_back(rle_decode(comp));
    }

    if (cfg.reclaim_boundary && !kept.empty()) {
        // One-pixel dilation into unclaimed edge pixels; ties go to the
        // lower component order-index.
        std::vector<std::int32_t> owner(static_cast<std::size_t>(w) * h, -1);
        for (std::size_t k = 0; k < kept.size(); ++k)
            for (std::size_t i = 0; i < kept[k].data.size(); ++i)
                if (kept[k].data[i]) owner[i] = static_cast<std::int32_t>(k);
        static const int dr[] = {-1, 1, 0, 0};
        static const int dc[] = {0, 0, -1, 1};
        std::vector<std::pair<std::size_t, std::int32_t>> claims;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const std::size_t i = static_cast<std::size_t>(r) * w + c;
                if (non_edge.data[i] || owner[i] >= 0) continue;
                std::int32_t best = -1;
                for (int d = 0; d < 4; ++d) {
                    const int nr = r + dr[d], nc = c + dc[d];
                    if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                    const std::int32_t o = owner[static_cast<std::size_t>(nr) * w + nc];
                    if (o >= 0 && (best < 0 || o < best)) best = o;
                }
                if (best >= 0) claims.emplace_back(i, best);
            }
        }
        for (const auto& [i, k] : claims) kept[k].data[i] = 1;
    }

    std::int64_t next_id = 0;
    for (const auto& bm : kept) {
        FieldInstance inst;
        inst.id = next_id++;
        inst.mask = rle_encode(bm);
        double g_sum = 0.0;
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < bm.data.size(); ++i) {
            if (bm.data[i]) {
                g_sum += grad[i];
                ++n;
            }
        }
        inst.score = std::clamp(1.0 - (n ? g_sum / static_cast<double>(n) : 0.0), 0.0, 1.0);
        out.instances.push_back(std::move(inst));
    }
    return out;
}

BaselineBackend::BaselineBackend(BaselineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

DetectionSet BaselineBackend::segment(const RasterPatch& patch) const {
    return baseline_edge_watershed(patch, cfg_);
}

RleFile to_rle_file(const DetectionSet& dets) {
    RleFile file;
    file.width = dets.width;
    file.height = dets.height;
    for (const auto& inst : dets.instances) {
        RleRecord rec;
        rec.id = inst.id;
        rec.has_score = true;
        rec.score = inst.score;
        rec.mask = inst.mask;
        file.instances.push_back(std::move(rec));
    }
    return file;
}

DetectionSet from_rle_file(const RleFile& file, bool require_scores) {
    DetectionSet dets;
    dets.width = file.width;
    dets.height = file.height;
    for (const auto& rec : file.instances) {
        FieldInstance inst;
        inst.id = rec.id;
        inst.mask = rec.mask;
        if (rec.has_score) {
            inst.score = rec.score;
        } else if (require_scores) {
            throw Error(ErrorCode::Protocol,
                        "instance " + std::to_string(rec.id) + " has no score");
        } else {
            inst.score = 1.0;
        }
        dets.instances.push_back(std::move(inst));
    }
    dets.validate();
    return dets;
}

}  // namespace fieldline
