#include <gtest/gtest.h>

#include <set>

#include "daam/render.hpp"
#include "test_support.hpp"

using namespace daam;
using daam::testing::random_mask;
using daam::testing::slurp;

namespace {

Colormap turbo() { return Colormap::load(std::string(DAAM_DATA_DIR) + "/colormaps/turbo5.json"); }

OverlaySpec spec_of(double alpha, DrawMode mode = DrawMode::soft) {
    OverlaySpec s;
    s.alpha = alpha;
    s.colormap = turbo();
    s.draw_mode = mode;
    return s;
}

RgbImage noise_image(std::uint32_t h, std::uint32_t w, std::uint64_t seed) {
    Xoshiro256StarStar rng(seed);
    RgbImage img(h, w);
    for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

HeatMap map_of(Grid<double> g) { return HeatMap{std::move(g), SubjectKind::token, 0}; }

// Boundary pixels found by checking the four neighbour offsets explicitly.
std::set<std::pair<long, long>> boundary_oracle(const Mask& m) {
    std::set<std::pair<long, long>> out;
    const long H = long(m.height()), W = long(m.width());
    auto on = [&](long r, long c) { return r >= 0 && c >= 0 && r < H && c < W && m(r, c); };
    const long dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (long r = 0; r < H; ++r)
        for (long c = 0; c < W; ++c) {
            if (!on(r, c)) continue;
            for (int k = 0; k < 4; ++k)
                if (!on(r + dr[k], c + dc[k])) out.insert({r, c});
        }
    return out;
}

} // namespace

TEST(ColormapTest, DefaultFileContents) {
    const std::string expected = R"({
  "name": "turbo5",
  "anchors": [
    {"at": 0.0, "rgb": [48, 18, 59]},
    {"at": 0.25, "rgb": [50, 136, 236]},
    {"at": 0.5, "rgb": [26, 228, 182]},
    {"at": 0.75, "rgb": [250, 186, 57]},
    {"at": 1.0, "rgb": [122, 4, 3]}
  ]
}
)";
    EXPECT_EQ(slurp(std::string(DAAM_DATA_DIR) + "/colormaps/turbo5.json"), expected);
    EXPECT_EQ(turbo().name, "turbo5");
}

TEST(ColormapTest, AnchorsAreExact) {
    const auto cm = turbo();
    for (const auto& a : cm.anchors) {
        const auto rgb = colormap_lookup(a.at, cm);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(rgb[k], double(a.rgb[k]));
    }
}

TEST(ColormapTest, InterpolatesLinearly) {
    const auto rgb = colormap_lookup(0.125, turbo());
    EXPECT_DOUBLE_EQ(rgb[0], 49.0);
    EXPECT_DOUBLE_EQ(rgb[1], 77.0);
    EXPECT_DOUBLE_EQ(rgb[2], 147.5);
}

TEST(ColormapTest, OutOfRange) {
    for (double v : {-0.01, 1.01, std::nan("")}) {
        try {
            colormap_lookup(v, turbo());
            FAIL() << v;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
        }
    }
}

TEST(ColormapTest, RejectsBadDefinitions) {
    using nlohmann::json;
    EXPECT_THROW(Colormap::from_json(json::parse(R"({"anchors": [{"at": 0, "rgb": [0,0,0]}]})")), Error);
    EXPECT_THROW(Colormap::from_json(json::parse(R"({"anchors": [{"at": 0.1, "rgb": [0,0,0]}, {"at": 1, "rgb": [0,0,0]}]})")),
                 Error);
    EXPECT_THROW(Colormap::from_json(json::parse(R"({"anchors": [{"at": 0, "rgb": [0,0,0]}, {"at": 0, "rgb": [0,0,0]}, {"at": 1, "rgb": [0,0,0]}]})")),
                 Error);
    EXPECT_THROW(Colormap::from_json(json::parse(R"({"anchors": [{"at": 0, "rgb": [0,0,256]}, {"at": 1, "rgb": [0,0,0]}]})")),
                 Error);
    EXPECT_NO_THROW(Colormap::from_json(json::parse(R"({"anchors": [{"at": 0, "rgb": [0,0,0]}, {"at": 1, "rgb": [9,9,9]}]})")));
}

TEST(RenderSoft, ZeroMapIsIdentity) {
    const auto img = noise_image(8, 6, 1);
    EXPECT_EQ(render_soft(img, map_of(Grid<double>(8, 6, 0.0)), spec_of(1.0)), img);
}

TEST(RenderSoft, ZeroAlphaIsIdentity) {
    Xoshiro256StarStar rng(2);
    const auto img = noise_image(8, 6, 3);
    EXPECT_EQ(render_soft(img, map_of(daam::testing::random_grid(rng, 8, 6)), spec_of(0.0)), img);
}

TEST(RenderSoft, HotPixelTakesLastAnchor) {
    const auto img = noise_image(3, 3, 4);
    Grid<double> g(3, 3, 0.0);
    g(1, 2) = 5.0;
    const auto out = render_soft(img, map_of(g), spec_of(1.0));
    const auto* px = out.pixel(1, 2);
    EXPECT_EQ(px[0], 122);
    EXPECT_EQ(px[1], 4);
    EXPECT_EQ(px[2], 3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            if (!(r == 1 && c == 2)) {
                for (int k = 0; k < 3; ++k) EXPECT_EQ(out.pixel(r, c)[k], img.pixel(r, c)[k]);
            }
}

TEST(RenderSoft, BlendFormula) {
    RgbImage img(1, 2, 100);
    Grid<double> g(1, 2, 0.0);
    g(0, 0) = 1.0;
    g(0, 1) = 0.5;
    const auto out = render_soft(img, map_of(g), spec_of(0.5));
    // v = 0.5, weight 0.25, colour {26, 228, 182}
    EXPECT_EQ(out.pixel(0, 1)[0], std::lround(0.75 * 100 + 0.25 * 26));
    EXPECT_EQ(out.pixel(0, 1)[1], std::lround(0.75 * 100 + 0.25 * 228));
    EXPECT_EQ(out.pixel(0, 1)[2], std::lround(0.75 * 100 + 0.25 * 182));
}

TEST(RenderSoft, DimMismatch) {
    EXPECT_THROW(render_soft(RgbImage(4, 4), map_of(Grid<double>(4, 5, 1.0)), spec_of(0.5)), Error);
}

TEST(RenderSoft, AlphaRange) {
    EXPECT_THROW(render_soft(RgbImage(2, 2), map_of(Grid<double>(2, 2, 1.0)), spec_of(1.5)), Error);
}

TEST(RenderHard, EmptyMaskIsIdentity) {
    const auto img = noise_image(5, 5, 6);
    for (auto mode : {DrawMode::hard_fill, DrawMode::hard_outline})
        EXPECT_EQ(render_hard(img, HardMask{Mask(5, 5, 0), 0.4, 1.0}, spec_of(0.8, mode)), img);
}

TEST(RenderHard, FullFillAtAlphaOneIsHighlight) {
    const auto img = noise_image(5, 4, 7);
    const auto out = render_hard(img, HardMask{Mask(5, 4, 1), 0.4, 1.0}, spec_of(1.0, DrawMode::hard_fill));
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            EXPECT_EQ(out.pixel(r, c)[0], 255);
            EXPECT_EQ(out.pixel(r, c)[1], 0);
            EXPECT_EQ(out.pixel(r, c)[2], 0);
        }
}

TEST(RenderHard, ZeroAlphaIsIdentity) {
    Xoshiro256StarStar rng(8);
    const auto img = noise_image(6, 6, 9);
    EXPECT_EQ(render_hard(img, HardMask{random_mask(rng, 6, 6), 0.4, 1.0}, spec_of(0.0, DrawMode::hard_fill)), img);
}

TEST(RenderHard, InputsUnchanged) {
    Xoshiro256StarStar rng(10);
    const auto img = noise_image(6, 6, 11);
    const auto copy = img;
    const HardMask mask{random_mask(rng, 6, 6), 0.4, 1.0};
    const auto mask_copy = mask.data;
    render_hard(img, mask, spec_of(0.7, DrawMode::hard_outline));
    EXPECT_EQ(img, copy);
    EXPECT_EQ(mask.data, mask_copy);
}

TEST(Outline, TwoByTwoBlockIsAllBoundary) {
    Mask m(4, 4, 0);
    m(1, 1) = m(1, 2) = m(2, 1) = m(2, 2) = 1;
    const auto out = mask_outline(m);
    EXPECT_EQ(out, m);
    EXPECT_EQ(boundary_oracle(m).size(), 4u);
}

TEST(Outline, MatchesOracle) {
    Xoshiro256StarStar rng(12);
    for (int i = 0; i < 100; ++i) {
        const auto m = random_mask(rng, 1 + rng.below(12), 1 + rng.below(12), rng.uniform());
        const auto out = mask_outline(m);
        const auto expected = boundary_oracle(m);
        for (std::size_t r = 0; r < m.height(); ++r)
            for (std::size_t c = 0; c < m.width(); ++c)
                EXPECT_EQ(bool(out(r, c)), expected.count({long(r), long(c)}) == 1);
    }
}

TEST(Outline, InteriorOfFilledSquareIsClear) {
    const Mask m(5, 5, 1);
    const auto out = mask_outline(m);
    EXPECT_EQ(count_true(out), 16u);
    EXPECT_EQ(out(2, 2), 0);
}

TEST(RenderHard, OutlineTouchesOnlyBoundary) {
    const auto img = noise_image(5, 5, 13);
    const auto out = render_hard(img, HardMask{Mask(5, 5, 1), 0.4, 1.0}, spec_of(1.0, DrawMode::hard_outline));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(out.pixel(2, 2)[k], img.pixel(2, 2)[k]);
    EXPECT_EQ(out.pixel(0, 0)[0], 255);
}

TEST(DrawModeParse, Names) {
    EXPECT_EQ(parse_draw_mode("soft"), DrawMode::soft);
    EXPECT_EQ(parse_draw_mode("hard_fill"), DrawMode::hard_fill);
    EXPECT_EQ(parse_draw_mode("hard_outline"), DrawMode::hard_outline);
    EXPECT_FALSE(parse_draw_mode("outline"));
}
