#include "o2sr/fusion.hpp"

namespace o2sr {

std::vector<std::string> FusionConfig::active_branches() const
{
    if (mode == FusionMode::concat_3_5) return {"conv3", "conv5"};
    std::vector<std::string> out;
    if (conv3) out.push_back("conv3");
    if (conv5) out.push_back("conv5");
    if (shift) out.push_back("shift");
    return out;
}

void FusionConfig::validate(int channels) const
{
    if (active_branches().empty()) throw ConfigError("fusion needs at least one branch enabled");
    if (groups < 1 || channels % groups != 0)
        throw ConfigError("model.branch_groups " + std::to_string(groups) + " does not divide channels " +
                          std::to_string(channels));
}

FeatureMap conv2d_feature(const FeatureMap& m, const ConvParams& p)
{
    if (p.weight.shape().size() == 4 && p.weight.dim(1) * p.groups != m.channels())
        throw ShapeError("conv expects " + std::to_string(p.weight.dim(1) * p.groups) + " channels, got " +
                         std::to_string(m.channels()));
    return kernels::conv2d_forward(m, p.weight, p.bias, p.groups, kernels::Padding::reflect);
}

int shift_group(int channel, int channels)
{
    const int base = channels / 5, rem = channels % 5;
    int start = 0;
    for (int g = 0; g < 5; ++g) {
        const int n = base + (g < rem ? 1 : 0);
        if (channel < start + n) return g;
        start += n;
    }
    return 4;
}

namespace {

// Source offset (dy, dx) read by each group: out(y, x) = in(y + dy, x + dx).
constexpr int kShiftDy[5] = {0, 0, 1, -1, 0};
constexpr int kShiftDx[5] = {1, -1, 0, 0, 0};

FeatureMap shift_impl(const FeatureMap& m, int sign)
{
    FeatureMap out(m.channels(), m.height(), m.width());
    for (int c = 0; c < m.channels(); ++c) {
        const int g = shift_group(c, m.channels());
        const int dy = sign * kShiftDy[g], dx = sign * kShiftDx[g];
        for (int y = 0; y < m.height(); ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= m.height()) continue;
            for (int x = 0; x < m.width(); ++x) {
                const int sx = x + dx;
                if (sx >= 0 && sx < m.width()) out(c, y, x) = m(c, sy, sx);
            }
        }
    }
    return out;
}

} // namespace

FeatureMap shift_channels(const FeatureMap& m) { return shift_impl(m, 1); }

FeatureMap shift_channels_adjoint(const FeatureMap& m) { return shift_impl(m, -1); }

FeatureMap shift_conv(const FeatureMap& m, const ConvParams& pointwise)
{
    if (pointwise.weight.shape().size() != 4 || pointwise.weight.dim(2) != 1)
        throw ShapeError("shift conv needs a 1x1 pointwise kernel");
    return conv2d_feature(shift_channels(m), pointwise);
}

void declare_fusion(ParameterSet& params, const std::string& prefix, int channels, const FusionConfig& cfg)
{
    cfg.validate(channels);
    const int c = channels, cg = channels / cfg.groups;
    const auto branches = cfg.active_branches();
    for (const std::string& b : branches) {
        if (b == "conv3") params.add(prefix + "conv3.weight", {c, cg, 3, 3});
        if (b == "conv5") params.add(prefix + "conv5.weight", {c, cg, 5, 5});
        if (b == "shift") params.add(prefix + "shift.weight", {c, c, 1, 1});
        params.add(prefix + b + ".bias", {c});
    }
    if (cfg.mode == FusionMode::sum) {
        for (const std::string& b : branches) {
            params.add(prefix + "proj_" + b + ".weight", {c, c, 1, 1});
            params.add(prefix + "proj_" + b + ".bias", {c});
        }
    } else {
        params.add(prefix + "proj.weight", {c, c * static_cast<int>(branches.size()), 1, 1});
        params.add(prefix + "proj.bias", {c});
    }
}

Var fuse(Tape& t, Var z, Var x, const ParameterSet& params, ParameterSet* grads, const std::string& prefix,
         const FusionConfig& cfg)
{
    const FeatureMap& zv = t.value(z);
    if (!zv.same_shape(t.value(x)))
        throw ShapeError("fusion inputs differ: " + zv.dims_string() + " vs " + t.value(x).dims_string());
    cfg.validate(zv.channels());

    auto p = [&](const std::string& n) { return params.ref(prefix + n, grads); };
    std::vector<Var> modulated;
    for (const std::string& b : cfg.active_branches()) {
        Var m;
        if (b == "shift")
            m = ops::conv2d(t, ops::shift(t, z), p("shift.weight"), p("shift.bias"));
        else
            m = ops::conv2d(t, z, p(b + ".weight"), p(b + ".bias"), cfg.groups);
        modulated.push_back(ops::scale_channels(t, m, ops::orientation_gate(t, m)));
    }

    if (cfg.mode == FusionMode::sum) {
        Var out = x;
        const auto branches = cfg.active_branches();
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const std::string n = "proj_" + branches[i];
            out = ops::add(t, out, ops::sigmoid(t, ops::conv2d(t, modulated[i], p(n + ".weight"), p(n + ".bias"))));
        }
        return out;
    }
    const Var cat = modulated.size() == 1 ? modulated[0] : ops::concat(t, modulated);
    const Var gated = ops::sigmoid(t, ops::conv2d(t, cat, p("proj.weight"), p("proj.bias")));
    return cfg.mode == FusionMode::concat_all_skip ? ops::add(t, x, gated) : gated;
}

FeatureMap fuse(const FeatureMap& z, const FeatureMap& x, const ParameterSet& params, const std::string& prefix,
                const FusionConfig& cfg)
{
    Tape t(false);
    const Var zv = t.constant(z);
    const Var xv = t.constant(x);
    return t.value(fuse(t, zv, xv, params, nullptr, prefix, cfg));
}

std::string to_string(FusionMode m)
{
    switch (m) {
    case FusionMode::sum: return "sum";
    case FusionMode::concat_all: return "concat_all";
    case FusionMode::concat_all_skip: return "concat_all_skip";
    case FusionMode::concat_3_5: return "concat_3_5";
    }
    return "sum";
}

FusionMode parse_fusion_mode(const std::string& s)
{
    for (FusionMode m : {FusionMode::sum, FusionMode::concat_all, FusionMode::concat_all_skip, FusionMode::concat_3_5})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown fusion mode \"" + s + "\"");
}

} // namespace o2sr
