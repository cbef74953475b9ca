#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fieldline/mask.hpp"

using namespace fieldline;

namespace {

Bitmap random_bitmap(std::mt19937& rng, int max_side, double density = 0.5) {
    const int w = 1 + static_cast<int>(rng() % max_side);
    const int h = 1 + static_cast<int>(rng() % max_side);
    Bitmap bm(w, h);
    std::bernoulli_distribution bit(density);
    for (auto& v : bm.data) v = bit(rng) ? 1 : 0;
    return bm;
}

Bitmap square(int canvas_w, int canvas_h, int r0, int c0, int size) {
    Bitmap bm(canvas_w, canvas_h);
    for (int r = r0; r < r0 + size; ++r)
        for (int c = c0; c < c0 + size; ++c) bm.set(r, c);
    return bm;
}

std::uint64_t pixel_count(const Bitmap& bm) {
    std::uint64_t n = 0;
    for (auto v : bm.data) n += v;
    return n;
}

}  // namespace

TEST_CASE("rle examples") {
    Bitmap empty(2, 2);
    CHECK(rle_encode(empty).counts == std::vector<std::uint32_t>{4});

    Bitmap full(2, 2);
    std::fill(full.data.begin(), full.data.end(), 1);
    CHECK(rle_encode(full).counts == std::vector<std::uint32_t>{0, 4});

    // (row 0, col 1) in a column-major scan sits at linear index 2
    Bitmap one(2, 2);
    one.set(0, 1);
    CHECK(rle_encode(one).counts == std::vector<std::uint32_t>{2, 1, 1});

    InstanceMask m{2, 2, {2, 1, 1}};
    const Bitmap back = rle_decode(m);
    CHECK(back.at(0, 1) == 1);
    CHECK(pixel_count(back) == 1);
}

TEST_CASE("corrupt counts rejected") {
    InstanceMask bad{2, 2, {3}};
    CHECK_THROWS_AS(rle_decode(bad), Error);
    InstanceMask zero_run{2, 2, {1, 0, 3}};
    CHECK_THROWS_AS(rle_decode(zero_run), Error);
}

TEST_CASE("round-trip on random bitmaps") {
    std::mt19937 rng(42);
    for (int i = 0; i < 300; ++i) {
        const Bitmap bm = random_bitmap(rng, 256);
        const InstanceMask m = rle_encode(bm);
        m.validate();
        const Bitmap back = rle_decode(m);
        CHECK(back.data == bm.data);
    }
}

TEST_CASE("iou examples") {
    const Bitmap a = square(20, 20, 0, 0, 10);
    CHECK(mask_iou(rle_encode(a), rle_encode(a)) == 1.0);

    const Bitmap b = square(20, 20, 10, 10, 5);
    CHECK(mask_iou(rle_encode(square(20, 20, 0, 0, 5)), rle_encode(b)) == 0.0);

    // two 10x10 squares offset by one column: 90/110
    const Bitmap c = square(20, 20, 0, 1, 10);
    CHECK(mask_iou(rle_encode(a), rle_encode(c)) == doctest::Approx(90.0 / 110.0).epsilon(1e-12));

    InstanceMask e1{4, 4, {16}};
    CHECK(mask_iou(e1, e1) == 0.0);  // both empty -> 0 by definition

    InstanceMask other{5, 5, {25}};
    CHECK_THROWS_AS(mask_iou(e1, other), Error);
}

TEST_CASE("iou algebra on random pairs") {
    std::mt19937 rng(1);
    for (int i = 0; i < 100; ++i) {
        Bitmap a = random_bitmap(rng, 64);
        Bitmap b(a.width, a.height);
        std::bernoulli_distribution bit(0.4);
        for (auto& v : b.data) v = bit(rng) ? 1 : 0;
        const InstanceMask ma = rle_encode(a), mb = rle_encode(b);

        const double iou_ab = mask_iou(ma, mb);
        CHECK(iou_ab == mask_iou(mb, ma));
        CHECK(iou_ab >= 0.0);
        CHECK(iou_ab <= 1.0);
        if (ma.area() > 0) CHECK(mask_iou(ma, ma) == 1.0);

        // inclusion-exclusion, exact in integers
        const std::uint64_t inter = rle_intersection_area(ma, mb);
        std::uint64_t brute_inter = 0, brute_union = 0;
        for (std::size_t k = 0; k < a.data.size(); ++k) {
            brute_inter += a.data[k] && b.data[k];
            brute_union += a.data[k] || b.data[k];
        }
        CHECK(inter == brute_inter);
        CHECK(ma.area() + mb.area() - inter == brute_union);
    }
}

TEST_CASE("boundary band examples") {
    Bitmap px(1, 1);
    px.set(0, 0);
    const InstanceMask m1 = rle_encode(px);
    CHECK(boundary_band(m1, 1) == m1);

    CHECK(boundary_band(rle_encode(square(3, 3, 0, 0, 3)), 1).area() == 8);
    CHECK(boundary_band(rle_encode(square(5, 5, 0, 0, 5)), 2).area() == 24);

    CHECK_THROWS_AS(boundary_band(m1, 0), Error);
}

TEST_CASE("band monotone in thickness, bounded by mask area") {
    std::mt19937 rng(3);
    for (int i = 0; i < 40; ++i) {
        const Bitmap bm = random_bitmap(rng, 48, 0.7);
        const InstanceMask m = rle_encode(bm);
        std::uint64_t prev = 0;
        for (int t = 1; t <= 4; ++t) {
            const std::uint64_t a = boundary_band(m, t).area();
            CHECK(a >= prev);
            CHECK(a <= m.area());
            prev = a;
        }
    }
}

TEST_CASE("connected components") {
    Bitmap empty(6, 6);
    CHECK(connected_components(empty, 4).empty());

    Bitmap two(6, 6);
    two.set(0, 0);
    two.set(5, 5);
    const auto comps4 = connected_components(two, 4);
    REQUIRE(comps4.size() == 2);
    CHECK(comps4[0].area() == 1);
    CHECK(comps4[1].area() == 1);

    Bitmap diag(4, 4);
    diag.set(1, 1);
    diag.set(2, 2);
    CHECK(connected_components(diag, 4).size() == 2);
    CHECK(connected_components(diag, 8).size() == 1);
}

TEST_CASE("component areas partition the foreground") {
    std::mt19937 rng(9);
    for (int i = 0; i < 50; ++i) {
        const Bitmap bm = random_bitmap(rng, 64);
        for (int conn : {4, 8}) {
            std::uint64_t total = 0;
            const auto comps = connected_components(bm, conn);
            for (const auto& c : comps) total += c.area();
            CHECK(total == pixel_count(bm));
            // disjointness
            for (std::size_t a = 0; a + 1 < comps.size(); ++a)
                CHECK(rle_intersection_area(comps[a], comps[a + 1]) == 0);
        }
    }
}

TEST_CASE("mask union") {
    const InstanceMask a = rle_encode(square(20, 20, 0, 0, 10));
    CHECK(mask_union({a}) == a);

    Bitmap left(4, 4), right(4, 4);
    for (int r = 0; r < 4; ++r) {
        left.set(r, 0);
        left.set(r, 1);
        right.set(r, 2);
        right.set(r, 3);
    }
    CHECK(mask_union({rle_encode(left), rle_encode(right)}).area() == 16);

    const InstanceMask b = rle_encode(square(20, 20, 0, 1, 10));
    CHECK(mask_union({a, b}).area() == 110);
}

TEST_CASE("crop and embed are consistent") {
    std::mt19937 rng(17);
    for (int i = 0; i < 50; ++i) {
        const Bitmap bm = random_bitmap(rng, 48);
        const InstanceMask m = rle_encode(bm);
        const int w = bm.width, h = bm.height;
        const int cw = 1 + static_cast<int>(rng() % w);
        const int ch = 1 + static_cast<int>(rng() % h);
        const int cx = static_cast<int>(rng() % (w - cw + 1));
        const int cy = static_cast<int>(rng() % (h - ch + 1));
        const InstanceMask local = mask_crop(m, {cx, cy, cw, ch});
        local.validate();
        const Bitmap lb = rle_decode(local);
        for (int r = 0; r < ch; ++r)
            for (int c = 0; c < cw; ++c) CHECK(lb.at(r, c) == bm.at(cy + r, cx + c));

        const InstanceMask back = mask_embed(local, cx, cy, w, h);
        back.validate();
        CHECK(back == mask_intersect_rect(m, {cx, cy, cw, ch}));
    }
}

TEST_CASE("bbox") {
    Bitmap bm(10, 8);
    bm.set(2, 3);
    bm.set(5, 7);
    const PixelRect r = mask_bbox(rle_encode(bm));
    CHECK(r.x == 3);
    CHECK(r.y == 2);
    CHECK(r.width == 5);
    CHECK(r.height == 4);
}

TEST_CASE("rlej round trip") {
    RleFile f;
    f.width = 3;
    f.height = 2;
    RleRecord rec;
    rec.id = 7;
    rec.has_score = true;
    rec.score = 0.5;
    Bitmap bm(3, 2);
    bm.set(1, 1);
    rec.mask = rle_encode(bm);
    f.instances.push_back(rec);
    RleRecord unscored;
    unscored.id = 8;
    unscored.mask = rle_encode(bm);
    f.instances.push_back(unscored);

    const RleFile back = rlej_parse(rlej_serialize(f));
    REQUIRE(back.instances.size() == 2);
    CHECK(back.instances[0].id == 7);
    CHECK(back.instances[0].has_score);
    CHECK(back.instances[0].score == 0.5);
    CHECK(!back.instances[1].has_score);
    CHECK(back.instances[0].mask == rec.mask);

    CHECK_THROWS_AS(rlej_parse("{not json"), Error);
    CHECK_THROWS_AS(rlej_parse(R"({"width":2,"height":2,"instances":[{"id":1,"counts":[9]}]})"),
                    Error);
}
