#include "o2sr/tape.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "o2sr/fusion.hpp"
#include "o2sr/orientation.hpp"

namespace o2sr {

Var Tape::constant(FeatureMap value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(FeatureMap value) { return push(std::move(value), record_, nullptr); }

Var Tape::push(FeatureMap value, bool requires_grad, Backward backward)
{
    Node n;
    n.value = std::move(value);
    n.requires_grad = record_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

FeatureMap& Tape::grad(Var v)
{
    Node& n = nodes_.at(v);
    if (n.grad.empty()) n.grad = FeatureMap(n.value.channels(), n.value.height(), n.value.width());
    return n.grad;
}

const FeatureMap* Tape::grad_if(Var v) const
{
    const Node& n = nodes_.at(v);
    return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(Var out, FeatureMap seed)
{
    if (!record_) throw ContractError("backward on a tape that did not record");
    if (!seed.same_shape(value(out))) throw ShapeError("gradient seed shape mismatch");
    nodes_.at(out).grad = std::move(seed);
    for (Var v = out; v >= 0; --v) {
        Node& n = nodes_[v];
        if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(*this, v);
    }
}

namespace ops {

namespace {

bool wants(const ParamRef& p) { return p.grad != nullptr; }

void check_same(const FeatureMap& a, const FeatureMap& b, const char* op)
{
    if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": " + a.dims_string() + " vs " + b.dims_string());
}

void accumulate(FeatureMap& dst, const FeatureMap& src)
{
    auto d = dst.data();
    const auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <class Fwd, class Deriv>
Var unary(Tape& t, Var x, Fwd f, Deriv df)
{
    const FeatureMap& xv = t.value(x);
    FeatureMap out(xv.channels(), xv.height(), xv.width());
    const auto s = xv.data();
    auto o = out.data();
    for (std::size_t i = 0; i < s.size(); ++i) o[i] = f(s[i]);
    return t.push(std::move(out), t.requires_grad(x), [x, df](Tape& t, Var self) {
        const auto s = t.value(x).data();
        const auto y = t.value(self).data();
        const auto g = t.grad(self).data();
        auto gx = t.grad(x).data();
        for (std::size_t i = 0; i < s.size(); ++i) gx[i] += g[i] * df(s[i], y[i]);
    });
}

} // namespace

Var conv2d(Tape& t, Var x, ParamRef weight, ParamRef bias, int groups, kernels::Padding pad)
{
    static const Tensor no_bias;
    const Tensor& b = bias.value ? *bias.value : no_bias;
    FeatureMap out = kernels::conv2d_forward(t.value(x), *weight.value, b, groups, pad);
    const bool req = t.requires_grad(x) || wants(weight) || wants(bias);
    return t.push(std::move(out), req, [x, weight, bias, groups, pad](Tape& t, Var self) {
        FeatureMap* gx = t.requires_grad(x) ? &t.grad(x) : nullptr;
        kernels::conv2d_backward(t.value(x), *weight.value, groups, pad, t.grad(self), gx, weight.grad,
                                 bias.value ? bias.grad : nullptr);
    });
}

Var shift(Tape& t, Var x)
{
    return t.push(shift_channels(t.value(x)), t.requires_grad(x), [x](Tape& t, Var self) {
        accumulate(t.grad(x), shift_channels_adjoint(t.grad(self)));
    });
}

Var orientation_gate(Tape& t, Var x)
{
    const FeatureMap& xv = t.value(x);
    const OrientationDescriptor d = orientation_operator(xv);
    FeatureMap out(xv.channels(), 1, 1);
    for (int c = 0; c < xv.channels(); ++c) out(c, 0, 0) = d.v_stats[c] + d.h_stats[c];
    return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        std::vector<double> gc(g.channels());
        for (int c = 0; c < g.channels(); ++c) gc[c] = g(c, 0, 0);
        accumulate(t.grad(x), orientation_backward(t.value(x), gc, gc));
    });
}

Var scale_channels(Tape& t, Var x, Var gate)
{
    const FeatureMap& xv = t.value(x);
    const FeatureMap& gv = t.value(gate);
    if (gv.channels() != xv.channels() || gv.height() != 1 || gv.width() != 1)
        throw ShapeError("channel gate " + gv.dims_string() + " does not match " + xv.dims_string());
    FeatureMap out(xv.channels(), xv.height(), xv.width());
    for (int c = 0; c < xv.channels(); ++c) {
        const double s = gv(c, 0, 0);
        const auto src = xv.plane(c);
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * s;
    }
    const bool req = t.requires_grad(x) || t.requires_grad(gate);
    return t.push(std::move(out), req, [x, gate](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        const FeatureMap& xv = t.value(x);
        const FeatureMap& gv = t.value(gate);
        const bool gx = t.requires_grad(x), gg = t.requires_grad(gate);
        for (int c = 0; c < xv.channels(); ++c) {
            const auto gp = g.plane(c);
            const auto xp = xv.plane(c);
            if (gx) {
                auto dst = t.grad(x).plane(c);
                const double s = gv(c, 0, 0);
                for (std::size_t i = 0; i < gp.size(); ++i) dst[i] += gp[i] * s;
            }
            if (gg) {
                double acc = 0.0;
                for (std::size_t i = 0; i < gp.size(); ++i) acc += gp[i] * xp[i];
                t.grad(gate)(c, 0, 0) += acc;
            }
        }
    });
}

Var add(Tape& t, Var a, Var b)
{
    const FeatureMap& av = t.value(a);
    const FeatureMap& bv = t.value(b);
    check_same(av, bv, "add");
    FeatureMap out = av;
    accumulate(out, bv);
    const bool req = t.requires_grad(a) || t.requires_grad(b);
    return t.push(std::move(out), req, [a, b](Tape& t, Var self) {
        if (t.requires_grad(a)) accumulate(t.grad(a), t.grad(self));
        if (t.requires_grad(b)) accumulate(t.grad(b), t.grad(self));
    });
}

Var sigmoid(Tape& t, Var x)
{
    return unary(
        t, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Tape& t, Var x)
{
    return unary(
        t, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Tape& t, Var x)
{
    return unary(
        t, x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
        [](double v, double) {
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * pdf;
        });
}

Var concat(Tape& t, const std::vector<Var>& xs)
{
    if (xs.empty()) throw ShapeError("concat of nothing");
    const FeatureMap& first = t.value(xs[0]);
    int channels = 0;
    bool req = false;
    for (Var v : xs) {
        const FeatureMap& m = t.value(v);
        if (m.height() != first.height() || m.width() != first.width())
            throw ShapeError("concat spatial mismatch: " + m.dims_string() + " vs " + first.dims_string());
        channels += m.channels();
        req = req || t.requires_grad(v);
    }
    FeatureMap out(channels, first.height(), first.width());
    int c0 = 0;
    for (Var v : xs) {
        const FeatureMap& m = t.value(v);
        for (int c = 0; c < m.channels(); ++c) {
            const auto src = m.plane(c);
            std::copy(src.begin(), src.end(), out.plane(c0 + c).begin());
        }
        c0 += m.channels();
    }
    return t.push(std::move(out), req, [xs](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        int c0 = 0;
        for (Var v : xs) {
            const int n = t.value(v).channels();
            if (t.requires_grad(v)) {
                FeatureMap& gv = t.grad(v);
                for (int c = 0; c < n; ++c) {
                    const auto src = g.plane(c0 + c);
                    auto dst = gv.plane(c);
                    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
                }
            }
            c0 += n;
        }
    });
}

Var global_avg_pool(Tape& t, Var x)
{
    const FeatureMap& xv = t.value(x);
    FeatureMap out(xv.channels(), 1, 1);
    for (int c = 0; c < xv.channels(); ++c) {
        double s = 0.0;
        for (double v : xv.plane(c)) s += v;
        out(c, 0, 0) = s / static_cast<double>(xv.plane_size());
    }
    return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, Var self) {
        FeatureMap& gx = t.grad(x);
        const double n = static_cast<double>(gx.plane_size());
        for (int c = 0; c < gx.channels(); ++c) {
            const double g = t.grad(self)(c, 0, 0) / n;
            for (double& v : gx.plane(c)) v += g;
        }
    });
}

Var layer_norm(Tape& t, Var x, ParamRef gamma, ParamRef beta, double eps)
{
    const FeatureMap& xv = t.value(x);
    const int c = xv.channels();
    const std::size_t np = xv.plane_size();
    if (gamma.value->numel() != static_cast<std::size_t>(c) || beta.value->numel() != static_cast<std::size_t>(c))
        throw ShapeError("layer norm parameters do not match " + std::to_string(c) + " channels");
    FeatureMap out(c, xv.height(), xv.width());
    auto xhat = std::make_shared<FeatureMap>(c, xv.height(), xv.width());
    auto inv_std = std::make_shared<std::vector<double>>(np);
    const double* xd = xv.data().data();
    double* hd = xhat->data().data();
    double* od = out.data().data();
    for (std::size_t p = 0; p < np; ++p) {
        double mu = 0.0;
        for (int k = 0; k < c; ++k) mu += xd[k * np + p];
        mu /= c;
        double var = 0.0;
        for (int k = 0; k < c; ++k) var += (xd[k * np + p] - mu) * (xd[k * np + p] - mu);
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[p] = is;
        for (int k = 0; k < c; ++k) {
            hd[k * np + p] = (xd[k * np + p] - mu) * is;
            od[k * np + p] = (*gamma.value)[k] * hd[k * np + p] + (*beta.value)[k];
        }
    }
    const bool req = t.requires_grad(x) || wants(gamma) || wants(beta);
    return t.push(std::move(out), req, [x, gamma, beta, xhat, inv_std](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        const int c = g.channels();
        const std::size_t np = g.plane_size();
        const double* gd = g.data().data();
        const double* hd = xhat->data().data();
        if (gamma.grad || beta.grad)
            for (int k = 0; k < c; ++k) {
                double sg = 0.0, sb = 0.0;
                for (std::size_t p = 0; p < np; ++p) {
                    sg += gd[k * np + p] * hd[k * np + p];
                    sb += gd[k * np + p];
                }
                if (gamma.grad) (*gamma.grad)[k] += sg;
                if (beta.grad) (*beta.grad)[k] += sb;
            }
        if (!t.requires_grad(x)) return;
        double* gx = t.grad(x).data().data();
        std::vector<double> dh(c);
        for (std::size_t p = 0; p < np; ++p) {
            double m1 = 0.0, m2 = 0.0;
            for (int k = 0; k < c; ++k) {
                dh[k] = gd[k * np + p] * (*gamma.value)[k];
                m1 += dh[k];
                m2 += dh[k] * hd[k * np + p];
            }
            m1 /= c;
            m2 /= c;
            for (int k = 0; k < c; ++k) gx[k * np + p] += (*inv_std)[p] * (dh[k] - m1 - hd[k * np + p] * m2);
        }
    });
}

Var window_attention(Tape& t, Var qkv, int heads, int window, ParamRef rel_bias)
{
    auto probs = std::make_shared<std::vector<double>>();
    FeatureMap out = kernels::window_attention_forward(t.value(qkv), heads, window, rel_bias.value,
                                                       t.recording() ? probs.get() : nullptr);
    const bool req = t.requires_grad(qkv) || wants(rel_bias);
    return t.push(std::move(out), req, [qkv, heads, window, rel_bias, probs](Tape& t, Var self) {
        FeatureMap scratch;
        FeatureMap* gq = nullptr;
        if (t.requires_grad(qkv)) {
            gq = &t.grad(qkv);
        } else {
            const FeatureMap& v = t.value(qkv);
            scratch = FeatureMap(v.channels(), v.height(), v.width());
            gq = &scratch;
        }
        kernels::window_attention_backward(t.value(qkv), heads, window, rel_bias.value, *probs, t.grad(self), *gq,
                                           rel_bias.grad);
    });
}

Var pixel_shuffle(Tape& t, Var x, int factor)
{
    return t.push(kernels::pixel_shuffle(t.value(x), factor), t.requires_grad(x), [x, factor](Tape& t, Var self) {
        accumulate(t.grad(x), kernels::pixel_unshuffle(t.grad(self), factor));
    });
}

Var pad_bottom_right(Tape& t, Var x, int rows, int cols)
{
    if (rows == 0 && cols == 0) return x;
    const FeatureMap& xv = t.value(x);
    const int h = xv.height(), w = xv.width();
    FeatureMap out(xv.channels(), h + rows, w + cols);
    for (int c = 0; c < xv.channels(); ++c)
        for (int y = 0; y < h + rows; ++y)
            for (int xx = 0; xx < w + cols; ++xx) out(c, y, xx) = xv(c, reflect_index(y, h), reflect_index(xx, w));
    return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        FeatureMap& gx = t.grad(x);
        const int h = gx.height(), w = gx.width();
        for (int c = 0; c < g.channels(); ++c)
            for (int y = 0; y < g.height(); ++y)
                for (int xx = 0; xx < g.width(); ++xx) gx(c, reflect_index(y, h), reflect_index(xx, w)) += g(c, y, xx);
    });
}

Var crop(Tape& t, Var x, int height, int width)
{
    const FeatureMap& xv = t.value(x);
    if (height == xv.height() && width == xv.width()) return x;
    if (height > xv.height() || width > xv.width()) throw ShapeError("crop larger than map " + xv.dims_string());
    FeatureMap out(xv.channels(), height, width);
    for (int c = 0; c < xv.channels(); ++c)
        for (int y = 0; y < height; ++y)
            for (int xx = 0; xx < width; ++xx) out(c, y, xx) = xv(c, y, xx);
    return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, Var self) {
        const FeatureMap& g = t.grad(self);
        FeatureMap& gx = t.grad(x);
        for (int c = 0; c < g.channels(); ++c)
            for (int y = 0; y < g.height(); ++y)
                for (int xx = 0; xx < g.width(); ++xx) gx(c, y, xx) += g(c, y, xx);
    });
}

} // namespace ops

} // namespace o2sr
