#include <gtest/gtest.h>

#include <queue>

#include "clickmask/core.hpp"
#include "fixtures.hpp"
#include "oracles/oracles.hpp"

using namespace clickmask;

TEST(RasterImage, RejectsBadShapes) {
    EXPECT_THROW(RasterImage(0, 4, 1, 8), Error);
    EXPECT_THROW(RasterImage(4, 4, 17, 8), Error);
    EXPECT_THROW(RasterImage(4, 4, 1, 12), Error);
    EXPECT_THROW(RasterImage(2, 2, 1, 8, {1, 2, 3}), Error);
    EXPECT_THROW(RasterImage(1, 1, 1, 8, {256}), Error);
    EXPECT_NO_THROW(RasterImage(1, 1, 1, 16, {65535}));
}

TEST(ClickSet, OrdinalsAndUndo) {
    ClickSet clicks;
    clicks.add(1, 2, Polarity::Positive);
    clicks.add(3, 4, Polarity::Negative);
    EXPECT_EQ(clicks[0].ordinal, 0);
    EXPECT_EQ(clicks[1].ordinal, 1);
    clicks.undo();
    ASSERT_EQ(clicks.size(), 1u);
    EXPECT_EQ(clicks[0].x, 1);
    clicks.undo();
    EXPECT_THROW(clicks.undo(), Error);
    EXPECT_EQ(clicks.add(0, 0, Polarity::Positive).ordinal, 0);
}

TEST(Iou, BasicCases) {
    const auto a = fixtures::rect_mask(8, 8, 1, 1, 3, 3);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou(a, fixtures::rect_mask(8, 8, 5, 5, 2, 2)), 0.0);
    EXPECT_DOUBLE_EQ(iou(fixtures::rect_mask(8, 8, 1, 1, 2, 2), fixtures::rect_mask(8, 8, 0, 0, 4, 4)), 0.25);
    EXPECT_DOUBLE_EQ(iou(LabelMask(5, 5), LabelMask(5, 5)), 1.0);
    EXPECT_THROW(iou(LabelMask(5, 5), LabelMask(5, 6)), Error);
}

TEST(Iou, SymmetricOnRandomMasks) {
    fixtures::Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto a = fixtures::random_mask(rng, 12, 9, 0.3);
        const auto b = fixtures::random_mask(rng, 12, 9, 0.5);
        EXPECT_EQ(iou(a, b), iou(b, a));
        EXPECT_EQ(iou(a, a), 1.0);
    }
}

TEST(ConnectedComponents, DiagonalPixels) {
    LabelMask m(3, 3);
    m.set(0, 0, 1);
    m.set(1, 1, 1);
    EXPECT_EQ(connected_components(m, Connectivity::Four).count(), 2u);
    EXPECT_EQ(connected_components(m, Connectivity::Eight).count(), 1u);
}

TEST(ConnectedComponents, TwoBlocksRasterOrder) {
    LabelMask m(10, 10);
    for (int y = 6; y < 8; ++y)
        for (int x = 1; x < 3; ++x) m.set(x, y, 1);
    for (int y = 2; y < 4; ++y)
        for (int x = 6; x < 8; ++x) m.set(x, y, 1);
    const auto cc = connected_components(m, Connectivity::Four);
    ASSERT_EQ(cc.count(), 2u);
    EXPECT_EQ(cc.areas[0], 4u);
    EXPECT_EQ(cc.areas[1], 4u);
    // The block starting on row 2 is encountered first.
    EXPECT_EQ(cc.ids[2 * 10 + 6], 0);
    EXPECT_EQ(cc.ids[6 * 10 + 1], 1);
    EXPECT_EQ(connected_components(LabelMask(4, 4), Connectivity::Eight).count(), 0u);
}

TEST(ConnectedComponents, MatchesBfsOracle) {
    fixtures::Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto m = fixtures::random_mask(rng, 16, 13, 0.45);
        for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
            const auto cc = connected_components(m, conn);
            std::size_t total = 0;
            for (auto a : cc.areas) total += a;
            EXPECT_EQ(total, m.count_nonzero());
            // Each component is exactly the BFS closure of its first pixel.
            for (int id = 0; id < static_cast<int>(cc.count()); ++id) {
                const auto first = std::find(cc.ids.begin(), cc.ids.end(), id) - cc.ids.begin();
                std::vector<bool> seen(m.pixel_count(), false);
                std::queue<int> q;
                q.push(static_cast<int>(first));
                seen[first] = true;
                std::size_t area = 0;
                while (!q.empty()) {
                    const int p = q.front();
                    q.pop();
                    ++area;
                    EXPECT_EQ(cc.ids[p], id);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dx == 0 && dy == 0) continue;
                            if (conn == Connectivity::Four && dx != 0 && dy != 0) continue;
                            const int x = p % 16 + dx, y = p / 16 + dy;
                            if (x < 0 || y < 0 || x >= 16 || y >= 13) continue;
                            const int n = y * 16 + x;
                            if (m[n] && !seen[n]) {
                                seen[n] = true;
                                q.push(n);
                            }
                        }
                }
                EXPECT_EQ(area, cc.areas[id]);
            }
        }
    }
}

TEST(DistanceTransform, Examples) {
    for (double d : distance_transform(LabelMask(6, 4))) EXPECT_EQ(d, 0.0);

    LabelMask single(5, 5);
    single.set(2, 3, 1);
    const auto ds = distance_transform(single);
    for (int i = 0; i < 25; ++i) EXPECT_EQ(ds[i], i == 3 * 5 + 2 ? 1.0 : 0.0);

    const auto full = distance_transform(LabelMask(5, 5, 1));
    EXPECT_DOUBLE_EQ(full[2 * 5 + 2], 3.0);
}

TEST(DistanceTransform, MatchesBruteForceOnRandomMasks) {
    fixtures::Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const double density = 0.5 + 0.45 * rng.uniform();
        const auto m = fixtures::random_mask(rng, 32, 32, density);
        std::vector<int> fg(m.pixel_count());
        for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = m[i] != 0;
        const auto expected = oracle::brute_distance_transform(fg, 32, 32);
        const auto actual = distance_transform(m);
        for (std::size_t i = 0; i < fg.size(); ++i) ASSERT_NEAR(actual[i], expected[i], 1e-6);
    }
}
