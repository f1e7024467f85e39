#include "o2sr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace o2sr::kernels {

namespace {

struct AttnDims {
    int c, heads, dh, window, n, wins_y, wins_x, rel_side;
};

AttnDims check_attention(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias)
{
    if (qkv.channels() % 3 != 0) throw ShapeError("qkv channels must be a multiple of 3");
    const int c = qkv.channels() / 3;
    if (heads < 1 || c % heads != 0)
        throw ConfigError("channels " + std::to_string(c) + " not divisible by heads " + std::to_string(heads));
    if (window < 1 || qkv.height() % window != 0 || qkv.width() % window != 0)
        throw ShapeError("feature dims " + qkv.dims_string() + " not divisible by window " + std::to_string(window));
    const int side = 2 * window - 1;
    if (rel_bias && (rel_bias->shape() != std::vector<int>{heads, side, side}))
        throw ShapeError("relative bias table has wrong shape");
    return {c, heads, c / heads, window, window * window, qkv.height() / window, qkv.width() / window, side};
}

inline int rel_index(int i, int j, const AttnDims& d)
{
    const int yi = i / d.window, xi = i % d.window, yj = j / d.window, xj = j % d.window;
    return (yi - yj + d.window - 1) * d.rel_side + (xi - xj + d.window - 1);
}

// Gathers one head of Q, K, V for a window as token-major n x dh blocks.
void gather(const FeatureMap& qkv, const AttnDims& d, int wy, int wx, int h, std::vector<double>& q,
            std::vector<double>& k, std::vector<double>& v)
{
    for (int t = 0; t < d.n; ++t) {
        const int y = wy * d.window + t / d.window, x = wx * d.window + t % d.window;
        for (int e = 0; e < d.dh; ++e) {
            const int ch = h * d.dh + e;
            q[static_cast<std::size_t>(t) * d.dh + e] = qkv(ch, y, x);
            k[static_cast<std::size_t>(t) * d.dh + e] = qkv(d.c + ch, y, x);
            v[static_cast<std::size_t>(t) * d.dh + e] = qkv(2 * d.c + ch, y, x);
        }
    }
}

} // namespace

FeatureMap window_attention_forward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias,
                                    std::vector<double>* probs)
{
    const AttnDims d = check_attention(qkv, heads, window, rel_bias);
    const int n_windows = d.wins_y * d.wins_x;
    const std::size_t nn = static_cast<std::size_t>(d.n) * d.n;
    FeatureMap out(d.c, qkv.height(), qkv.width());
    if (probs) probs->assign(static_cast<std::size_t>(n_windows) * d.heads * nn, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.dh));

#pragma omp parallel for schedule(static)
    for (int win = 0; win < n_windows; ++win) {
        const int wy = win / d.wins_x, wx = win % d.wins_x;
        std::vector<double> q(static_cast<std::size_t>(d.n) * d.dh), k(q.size()), v(q.size()), p(nn);
        for (int h = 0; h < d.heads; ++h) {
            gather(qkv, d, wy, wx, h, q, k, v);
            for (int i = 0; i < d.n; ++i) {
                double* row = p.data() + static_cast<std::size_t>(i) * d.n;
                double mx = -INFINITY;
                for (int j = 0; j < d.n; ++j) {
                    double s = 0.0;
                    for (int e = 0; e < d.dh; ++e)
                        s += q[static_cast<std::size_t>(i) * d.dh + e] * k[static_cast<std::size_t>(j) * d.dh + e];
                    s *= scale;
                    if (rel_bias) s += (*rel_bias)[static_cast<std::size_t>(h) * d.rel_side * d.rel_side + rel_index(i, j, d)];
                    row[j] = s;
                    mx = std::max(mx, s);
                }
                double z = 0.0;
                for (int j = 0; j < d.n; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    z += row[j];
                }
                for (int j = 0; j < d.n; ++j) row[j] /= z;

                const int y = wy * d.window + i / d.window, x = wx * d.window + i % d.window;
                for (int e = 0; e < d.dh; ++e) {
                    double acc = 0.0;
                    for (int j = 0; j < d.n; ++j) acc += row[j] * v[static_cast<std::size_t>(j) * d.dh + e];
                    out(h * d.dh + e, y, x) = acc;
                }
            }
            if (probs)
                std::copy(p.begin(), p.end(),
                          probs->begin() + (static_cast<std::size_t>(win) * d.heads + h) * nn);
        }
    }
    return out;
}

void window_attention_backward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias,
                               const std::vector<double>& probs, const FeatureMap& grad_out,
                               FeatureMap& grad_qkv, Tensor* grad_rel_bias)
{
    const AttnDims d = check_attention(qkv, heads, window, rel_bias);
    const int n_windows = d.wins_y * d.wins_x;
    const std::size_t nn = static_cast<std::size_t>(d.n) * d.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.dh));
    const std::size_t table = static_cast<std::size_t>(d.heads) * d.rel_side * d.rel_side;
    std::vector<double> bias_grads(grad_rel_bias ? static_cast<std::size_t>(n_windows) * table : 0, 0.0);

#pragma omp parallel for schedule(static)
    for (int win = 0; win < n_windows; ++win) {
        const int wy = win / d.wins_x, wx = win % d.wins_x;
        const std::size_t nd = static_cast<std::size_t>(d.n) * d.dh;
        std::vector<double> q(nd), k(nd), v(nd), go(nd), dq(nd), dk(nd), dv(nd), dp(nn), ds(nn);
        for (int h = 0; h < d.heads; ++h) {
            gather(qkv, d, wy, wx, h, q, k, v);
            const double* p = probs.data() + (static_cast<std::size_t>(win) * d.heads + h) * nn;
            for (int t = 0; t < d.n; ++t) {
                const int y = wy * d.window + t / d.window, x = wx * d.window + t % d.window;
                for (int e = 0; e < d.dh; ++e) go[static_cast<std::size_t>(t) * d.dh + e] = grad_out(h * d.dh + e, y, x);
            }
            // dP = dO V^T, dV = P^T dO
            for (int i = 0; i < d.n; ++i)
                for (int j = 0; j < d.n; ++j) {
                    double s = 0.0;
                    for (int e = 0; e < d.dh; ++e)
                        s += go[static_cast<std::size_t>(i) * d.dh + e] * v[static_cast<std::size_t>(j) * d.dh + e];
                    dp[static_cast<std::size_t>(i) * d.n + j] = s;
                }
            for (int j = 0; j < d.n; ++j)
                for (int e = 0; e < d.dh; ++e) {
                    double s = 0.0;
                    for (int i = 0; i < d.n; ++i)
                        s += p[static_cast<std::size_t>(i) * d.n + j] * go[static_cast<std::size_t>(i) * d.dh + e];
                    dv[static_cast<std::size_t>(j) * d.dh + e] = s;
                }
            // softmax backward
            for (int i = 0; i < d.n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < d.n; ++j)
                    dot += p[static_cast<std::size_t>(i) * d.n + j] * dp[static_cast<std::size_t>(i) * d.n + j];
                for (int j = 0; j < d.n; ++j) {
                    const std::size_t ij = static_cast<std::size_t>(i) * d.n + j;
                    ds[ij] = p[ij] * (dp[ij] - dot);
                }
            }
            if (grad_rel_bias) {
                double* bg = bias_grads.data() + static_cast<std::size_t>(win) * table +
                             static_cast<std::size_t>(h) * d.rel_side * d.rel_side;
                for (int i = 0; i < d.n; ++i)
                    for (int j = 0; j < d.n; ++j) bg[rel_index(i, j, d)] += ds[static_cast<std::size_t>(i) * d.n + j];
            }
            for (int i = 0; i < d.n; ++i)
                for (int e = 0; e < d.dh; ++e) {
                    double s = 0.0;
                    for (int j = 0; j < d.n; ++j)
                        s += ds[static_cast<std::size_t>(i) * d.n + j] * k[static_cast<std::size_t>(j) * d.dh + e];
                    dq[static_cast<std::size_t>(i) * d.dh + e] = s * scale;
                }
            for (int j = 0; j < d.n; ++j)
                for (int e = 0; e < d.dh; ++e) {
                    double s = 0.0;
                    for (int i = 0; i < d.n; ++i)
                        s += ds[static_cast<std::size_t>(i) * d.n + j] * q[static_cast<std::size_t>(i) * d.dh + e];
                    dk[static_cast<std::size_t>(j) * d.dh + e] = s * scale;
                }
            for (int t = 0; t < d.n; ++t) {
                const int y = wy * d.window + t / d.window, x = wx * d.window + t % d.window;
                for (int e = 0; e < d.dh; ++e) {
                    const int ch = h * d.dh + e;
                    const std::size_t te = static_cast<std::size_t>(t) * d.dh + e;
                    grad_qkv(ch, y, x) += dq[te];
                    grad_qkv(d.c + ch, y, x) += dk[te];
                    grad_qkv(2 * d.c + ch, y, x) += dv[te];
                }
            }
        }
    }

    if (grad_rel_bias)
        for (int win = 0; win < n_windows; ++win)
            for (std::size_t i = 0; i < table; ++i)
                (*grad_rel_bias)[i] += bias_grads[static_cast<std::size_t>(win) * table + i];
}

namespace reference {

FeatureMap window_attention_forward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias)
{
    const AttnDims d = check_attention(qkv, heads, window, rel_bias);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.dh));
    FeatureMap out(d.c, qkv.height(), qkv.width());
    std::vector<double> logits(d.n);
    for (int y = 0; y < qkv.height(); ++y)
        for (int x = 0; x < qkv.width(); ++x) {
            const int wy = y / window, wx = x / window;
            const int i = (y % window) * window + x % window;
            for (int h = 0; h < d.heads; ++h) {
                double mx = -INFINITY;
                for (int j = 0; j < d.n; ++j) {
                    const int ky = wy * window + j / window, kx = wx * window + j % window;
                    double s = 0.0;
                    for (int e = 0; e < d.dh; ++e) s += qkv(h * d.dh + e, y, x) * qkv(d.c + h * d.dh + e, ky, kx);
                    s *= scale;
                    if (rel_bias) s += (*rel_bias)[static_cast<std::size_t>(h) * d.rel_side * d.rel_side + rel_index(i, j, d)];
                    logits[j] = s;
                    mx = std::max(mx, s);
                }
                double z = 0.0;
                for (double& l : logits) {
                    l = std::exp(l - mx);
                    z += l;
                }
                for (int e = 0; e < d.dh; ++e) {
                    double acc = 0.0;
                    for (int j = 0; j < d.n; ++j) {
                        const int ky = wy * window + j / window, kx = wx * window + j % window;
                        acc += logits[j] / z * qkv(2 * d.c + h * d.dh + e, ky, kx);
                    }
                    out(h * d.dh + e, y, x) = acc;
                }
            }
        }
    return out;
}

} // namespace reference

} // namespace o2sr::kernels
