#include <gtest/gtest.h>

#include "o2sr/fusion.hpp"
#include "o2sr/orientation.hpp"
#include "oracles.hpp"

using namespace o2sr;

namespace {

Tensor identity_pointwise(int c)
{
    Tensor w({c, c, 1, 1});
    for (int i = 0; i < c; ++i) w[static_cast<std::size_t>(i) * c + i] = 1.0;
    return w;
}

ParameterSet fusion_params(int c, const FusionConfig& cfg, std::uint64_t seed)
{
    ParameterSet p;
    declare_fusion(p, "f.", c, cfg);
    if (seed != 0) {
        Rng rng(seed);
        for (Tensor& t : p.tensors())
            for (double& v : t.data()) v = rng.uniform(-0.5, 0.5);
    }
    return p;
}

// sigma(proj(m * gate(m))) built from oracle pieces, one branch.
FeatureMap gated_branch(const FeatureMap& m, const Tensor& w, const Tensor& b)
{
    const auto v = orientation_v(m), h = orientation_h(m);
    FeatureMap mod = m;
    for (int c = 0; c < m.channels(); ++c)
        for (double& e : mod.plane(c)) e *= v[c] + h[c];
    FeatureMap out = oracle::conv(mod, w, b, 1);
    for (double& e : out.data()) e = 1.0 / (1.0 + std::exp(-e));
    return out;
}

} // namespace

TEST(ConvFeature, IdentityBiasAndOracle)
{
    Rng rng(1);
    const FeatureMap m = oracle::random_map(rng, 3, 4, 4);
    EXPECT_EQ(oracle::max_abs_diff(conv2d_feature(m, {identity_pointwise(3), Tensor({3}), 1}), m), 0.0);

    Tensor bias({2});
    bias[0] = 0.25;
    bias[1] = -1.5;
    const FeatureMap b = conv2d_feature(m, {Tensor({2, 3, 3, 3}), bias, 1});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            EXPECT_EQ(b(0, y, x), 0.25);
            EXPECT_EQ(b(1, y, x), -1.5);
        }

    const FeatureMap in = oracle::random_map(rng, 2, 4, 4);
    const ConvParams p{oracle::random_tensor(rng, {3, 2, 3, 3}), oracle::random_tensor(rng, {3}), 1};
    EXPECT_LE(oracle::max_abs_diff(conv2d_feature(in, p), oracle::conv(in, p.weight, p.bias, 1)), 1e-12);
    EXPECT_THROW(conv2d_feature(m, p), ShapeError);
}

TEST(ConvFeature, GroupedMatchesOracle)
{
    Rng rng(2);
    const FeatureMap in = oracle::random_map(rng, 4, 5, 6);
    const ConvParams p{oracle::random_tensor(rng, {4, 2, 5, 5}), oracle::random_tensor(rng, {4}), 2};
    EXPECT_LE(oracle::max_abs_diff(conv2d_feature(in, p), oracle::conv(in, p.weight, p.bias, 2)), 1e-12);
}

TEST(ShiftGroups, EvenSplitWithRemainderFirst)
{
    // 7 channels: groups of 2, 2, 1, 1, 1.
    const std::vector<int> expect{0, 0, 1, 1, 2, 3, 4};
    for (int c = 0; c < 7; ++c) EXPECT_EQ(shift_group(c, 7), expect[c]);
    for (int c = 0; c < 10; ++c) EXPECT_EQ(shift_group(c, 10), c / 2);
}

TEST(ShiftConv, ImpulseMovesLeft)
{
    FeatureMap m(5, 4, 4);
    m(0, 2, 2) = 1.0;  // channel 0 is in the left-shift group
    const FeatureMap out = shift_conv(m, {identity_pointwise(5), Tensor({5}), 1});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(out(0, y, x), y == 2 && x == 1 ? 1.0 : 0.0);
}

TEST(ShiftConv, ConstantMapZeroFillPattern)
{
    const FeatureMap m(5, 3, 4, 1.0);
    const FeatureMap out = shift_conv(m, {identity_pointwise(5), Tensor({5}), 1});
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) {
            EXPECT_EQ(out(0, y, x), x == 3 ? 0.0 : 1.0);  // left
            EXPECT_EQ(out(1, y, x), x == 0 ? 0.0 : 1.0);  // right
            EXPECT_EQ(out(2, y, x), y == 2 ? 0.0 : 1.0);  // up
            EXPECT_EQ(out(3, y, x), y == 0 ? 0.0 : 1.0);  // down
            EXPECT_EQ(out(4, y, x), 1.0);                 // identity
        }
}

TEST(ShiftConv, ZeroWeightsAndOracle)
{
    Rng rng(3);
    const FeatureMap m = oracle::random_map(rng, 7, 4, 5);
    const FeatureMap zero = shift_conv(m, {Tensor({7, 7, 1, 1}), Tensor({7}), 1});
    for (double v : zero.data()) EXPECT_EQ(v, 0.0);
    const ConvParams p{oracle::random_tensor(rng, {7, 7, 1, 1}), oracle::random_tensor(rng, {7}), 1};
    EXPECT_LE(oracle::max_abs_diff(shift_conv(m, p), oracle::conv(oracle::shift(m), p.weight, p.bias, 1)), 1e-12);
}

TEST(ShiftChannels, AdjointIdentity)
{
    Rng rng(4);
    const FeatureMap a = oracle::random_map(rng, 6, 4, 5), b = oracle::random_map(rng, 6, 4, 5);
    const FeatureMap sa = shift_channels(a), tb = shift_channels_adjoint(b);
    double l = 0.0, r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        l += sa.data()[i] * b.data()[i];
        r += a.data()[i] * tb.data()[i];
    }
    EXPECT_NEAR(l, r, 1e-12);
}

TEST(Fuse, ZeroWeightsAllBranches)
{
    Rng rng(5);
    const FeatureMap z = oracle::random_map(rng, 4, 4, 4), x = oracle::random_map(rng, 4, 4, 4);
    const FusionConfig cfg;
    const FeatureMap out = fuse(z, x, fusion_params(4, cfg, 0), "f.", cfg);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.data()[i], x.data()[i] + 1.5, 1e-15);
}

TEST(Fuse, ZeroWeightsSingleBranch)
{
    Rng rng(6);
    const FeatureMap z = oracle::random_map(rng, 4, 4, 4), x = oracle::random_map(rng, 4, 4, 4);
    FusionConfig cfg;
    cfg.conv3 = false;
    cfg.shift = false;
    const FeatureMap out = fuse(z, x, fusion_params(4, cfg, 0), "f.", cfg);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.data()[i], x.data()[i] + 0.5, 1e-15);
}

TEST(Fuse, SumModeMatchesComposedOracle)
{
    Rng rng(7);
    const int c = 5;
    const FeatureMap z = oracle::random_map(rng, c, 6, 5), x = oracle::random_map(rng, c, 6, 5);
    const FusionConfig cfg;
    const ParameterSet p = fusion_params(c, cfg, 8);
    FeatureMap expect = x;
    const std::vector<FeatureMap> branch = {
        oracle::conv(z, p.at("f.conv3.weight"), p.at("f.conv3.bias"), 1),
        oracle::conv(z, p.at("f.conv5.weight"), p.at("f.conv5.bias"), 1),
        oracle::conv(oracle::shift(z), p.at("f.shift.weight"), p.at("f.shift.bias"), 1),
    };
    const char* names[] = {"conv3", "conv5", "shift"};
    for (int b = 0; b < 3; ++b) {
        const std::string n = std::string("f.proj_") + names[b];
        const FeatureMap g = gated_branch(branch[b], p.at(n + ".weight"), p.at(n + ".bias"));
        for (std::size_t i = 0; i < expect.size(); ++i) expect.data()[i] += g.data()[i];
    }
    EXPECT_LE(oracle::max_abs_diff(fuse(z, x, p, "f.", cfg), expect), 1e-12);
}

TEST(Fuse, ShapesAndModes)
{
    Rng rng(9);
    const FeatureMap z = oracle::random_map(rng, 4, 5, 7), x = oracle::random_map(rng, 4, 5, 7);
    for (FusionMode mode : {FusionMode::sum, FusionMode::concat_all, FusionMode::concat_all_skip, FusionMode::concat_3_5}) {
        FusionConfig cfg;
        cfg.mode = mode;
        const ParameterSet p = fusion_params(4, cfg, 10);
        const FeatureMap out = fuse(z, x, p, "f.", cfg);
        EXPECT_TRUE(out.same_shape(z)) << to_string(mode);
        EXPECT_EQ(parse_fusion_mode(to_string(mode)), mode);
        if (mode == FusionMode::concat_3_5) {
            EXPECT_FALSE(p.contains("f.shift.weight"));
            EXPECT_EQ(p.at("f.proj.weight").dim(1), 8);
        }
        if (mode == FusionMode::concat_all) EXPECT_EQ(p.at("f.proj.weight").dim(1), 12);
    }
    FusionConfig skip;
    skip.mode = FusionMode::concat_all_skip;
    FusionConfig plain = skip;
    plain.mode = FusionMode::concat_all;
    const ParameterSet p = fusion_params(4, skip, 11);
    const FeatureMap a = fuse(z, x, p, "f.", skip), b = fuse(z, x, p, "f.", plain);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i] + x.data()[i], 1e-15);
}

TEST(Fuse, Errors)
{
    FusionConfig none;
    none.conv3 = none.conv5 = none.shift = false;
    ParameterSet p;
    EXPECT_THROW(declare_fusion(p, "f.", 4, none), ConfigError);
    FusionConfig cfg;
    const ParameterSet q = fusion_params(4, cfg, 1);
    EXPECT_THROW(fuse(FeatureMap(4, 4, 4), FeatureMap(4, 4, 5), q, "f.", cfg), ShapeError);
    EXPECT_THROW(parse_fusion_mode("mean"), ConfigError);
    FusionConfig grouped;
    grouped.groups = 3;
    EXPECT_THROW(grouped.validate(4), ConfigError);
}
