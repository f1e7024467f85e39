#include <gtest/gtest.h>

#include "o2sr/orientation.hpp"
#include "oracles.hpp"

using namespace o2sr;

namespace {

FeatureMap rows_0_2()
{
    FeatureMap z(1, 2, 2);
    z(0, 1, 0) = 2.0;
    z(0, 1, 1) = 2.0;
    return z;
}

} // namespace

TEST(StripMeans, ForcedCases)
{
    const FeatureMap z = rows_0_2();
    EXPECT_EQ(strip_mean_width(z)[0], (std::vector<double>{0.0, 2.0}));
    EXPECT_EQ(strip_mean_height(z)[0], (std::vector<double>{1.0, 1.0}));
    const FeatureMap c(2, 3, 4, 0.8);
    for (const auto& ch : strip_mean_width(c))
        for (double v : ch) EXPECT_DOUBLE_EQ(v, 0.8);
    for (const auto& ch : strip_mean_height(c))
        for (double v : ch) EXPECT_DOUBLE_EQ(v, 0.8);
}

TEST(StripMeans, MatchNestedLoopsAndTranspose)
{
    Rng rng(1);
    const FeatureMap z = oracle::random_map(rng, 3, 4, 5);
    const auto rows = strip_mean_width(z), cols = strip_mean_height(z);
    const auto cols_t = strip_mean_width(z.transposed());
    for (int c = 0; c < 3; ++c) {
        const auto a = oracle::row_means(z, c), b = oracle::col_means(z, c);
        for (int y = 0; y < 4; ++y) EXPECT_NEAR(rows[c][y], a[y], 1e-12);
        for (int x = 0; x < 5; ++x) {
            EXPECT_NEAR(cols[c][x], b[x], 1e-12);
            EXPECT_NEAR(cols[c][x], cols_t[c][x], 1e-12);
        }
    }
}

TEST(OrientationStats, ForcedCases)
{
    const FeatureMap z = rows_0_2();
    EXPECT_DOUBLE_EQ(orientation_v(z)[0], 1.0);
    EXPECT_EQ(orientation_h(z)[0], 0.0);
    const FeatureMap c(2, 5, 3, -0.3);
    for (double v : orientation_v(c)) EXPECT_EQ(v, 0.0);
    for (double v : orientation_h(c)) EXPECT_EQ(v, 0.0);
}

TEST(OrientationStats, ShiftTransposeScale)
{
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const FeatureMap z = oracle::random_map(rng, 2, 3 + t % 4, 4 + t % 3);
        FeatureMap moved = z, scaled = z;
        for (double& v : moved.data()) v += 3.5;
        for (double& v : scaled.data()) v *= -2.0;
        const auto v = orientation_v(z), h = orientation_h(z);
        for (int c = 0; c < 2; ++c) {
            EXPECT_NEAR(orientation_v(moved)[c], v[c], 1e-12);
            EXPECT_NEAR(orientation_h(z.transposed())[c], v[c], 1e-15);
            EXPECT_NEAR(orientation_v(scaled)[c], 4.0 * v[c], 1e-12);
            EXPECT_NEAR(orientation_h(scaled)[c], 4.0 * h[c], 1e-12);
            EXPECT_NEAR(v[c], oracle::variance(oracle::row_means(z, c)), 1e-12);
        }
    }
}

TEST(OrientationOperator, VerticalStripes)
{
    FeatureMap z(1, 4, 6);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) z(0, y, x) = x % 2;
    const OrientationDescriptor d = orientation_operator(z);
    EXPECT_EQ(d.v_stats[0], 0.0);
    EXPECT_NEAR(d.h_stats[0], oracle::variance(oracle::col_means(z, 0)), 1e-15);
    EXPECT_GT(d.h_stats[0], 0.0);
    EXPECT_EQ(d.channels(), 1);
}

TEST(Modulate, ZeroUnitAndProduct)
{
    Rng rng(3);
    const FeatureMap m = oracle::random_map(rng, 3, 4, 4);
    OrientationDescriptor zero{{0, 0, 0}, {0, 0, 0}};
    const FeatureMap silenced = modulate(m, zero);
    for (double v : silenced.data()) EXPECT_EQ(v, 0.0);
    OrientationDescriptor unit{{1, 1, 1}, {0, 0, 0}};
    EXPECT_EQ(oracle::max_abs_diff(modulate(m, unit), m), 0.0);

    const OrientationDescriptor own = orientation_operator(m);
    const FeatureMap out = modulate(m, own);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                EXPECT_NEAR(out(c, y, x), m(c, y, x) * (own.v_stats[c] + own.h_stats[c]), 1e-15);
    EXPECT_THROW(modulate(m, OrientationDescriptor{{1}, {1}}), ShapeError);
}

TEST(OrientationBackward, MatchesFiniteDifferences)
{
    Rng rng(4);
    FeatureMap z = oracle::random_map(rng, 2, 3, 5);
    const std::vector<double> gv{0.7, -1.2}, gh{0.4, 2.0};
    auto f = [&] {
        const auto v = orientation_v(z), h = orientation_h(z);
        return gv[0] * v[0] + gv[1] * v[1] + gh[0] * h[0] + gh[1] * h[1];
    };
    const FeatureMap g = orientation_backward(z, gv, gh);
    std::vector<double> numeric;
    for (double& v : z.data()) numeric.push_back(oracle::central_difference(f, v, 1e-6));
    EXPECT_LE(oracle::relative_error({g.data().begin(), g.data().end()}, numeric), 1e-8);
}
