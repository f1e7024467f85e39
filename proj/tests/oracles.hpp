#pragma once

// Independent nested-loop references used only by tests. They share no code
// with the library beyond the data containers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "o2sr/common.hpp"
#include "o2sr/image.hpp"
#include "o2sr/tensor.hpp"

namespace oracle {

using o2sr::FeatureMap;
using o2sr::Image;
using o2sr::Tensor;

inline int mirror(int i, int n)
{
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

inline FeatureMap random_map(o2sr::Rng& rng, int c, int h, int w, double lo = -1.0, double hi = 1.0)
{
    FeatureMap m(c, h, w);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

inline Image random_image(o2sr::Rng& rng, int h, int w, int channels = 1)
{
    Image img(h, w, channels);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

inline Tensor random_tensor(o2sr::Rng& rng, std::vector<int> shape, double scale = 1.0)
{
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(-scale, scale);
    return t;
}

/// Same-size correlation with mirror padding on every channel.
inline Image correlate(const Image& img, const std::vector<double>& k, int size)
{
    const int r = size / 2;
    Image out(img.height(), img.width(), img.channels());
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                double s = 0.0;
                for (int i = -r; i <= r; ++i)
                    for (int j = -r; j <= r; ++j)
                        s += k[(i + r) * size + (j + r)] *
                             img.at(mirror(y + i, img.height()), mirror(x + j, img.width()), c);
                out.at(y, x, c) = s;
            }
    return out;
}

/// Grouped conv, "same" size, mirror padding.
inline FeatureMap conv(const FeatureMap& in, const Tensor& w, const Tensor& b, int groups)
{
    const int oc = w.dim(0), icg = w.dim(1), k = w.dim(2), r = k / 2;
    const int ocg = oc / groups;
    FeatureMap out(oc, in.height(), in.width());
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < in.height(); ++y)
            for (int x = 0; x < in.width(); ++x) {
                double s = b.numel() ? b[o] : 0.0;
                for (int ci = 0; ci < icg; ++ci)
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j)
                            s += w[((static_cast<std::size_t>(o) * icg + ci) * k + i) * k + j] *
                                 in((o / ocg) * icg + ci, mirror(y + i - r, in.height()), mirror(x + j - r, in.width()));
                out(o, y, x) = s;
            }
    return out;
}

/// One-pixel shifts by channel group (left, right, up, down, identity),
/// groups as even as possible with the remainder going to the first groups.
inline FeatureMap shift(const FeatureMap& in)
{
    const int c = in.channels();
    std::vector<int> group(c);
    int ch = 0;
    for (int g = 0; g < 5; ++g)
        for (int n = 0; n < c / 5 + (g < c % 5 ? 1 : 0); ++n) group[ch++] = g;
    FeatureMap out(c, in.height(), in.width());
    for (int k = 0; k < c; ++k)
        for (int y = 0; y < in.height(); ++y)
            for (int x = 0; x < in.width(); ++x) {
                int sy = y, sx = x;
                switch (group[k]) {
                case 0: sx = x + 1; break;
                case 1: sx = x - 1; break;
                case 2: sy = y + 1; break;
                case 3: sy = y - 1; break;
                default: break;
                }
                const bool inside = sy >= 0 && sy < in.height() && sx >= 0 && sx < in.width();
                out(k, y, x) = inside ? in(k, sy, sx) : 0.0;
            }
    return out;
}

inline std::vector<double> row_means(const FeatureMap& z, int c)
{
    std::vector<double> a(z.height(), 0.0);
    for (int y = 0; y < z.height(); ++y) {
        for (int x = 0; x < z.width(); ++x) a[y] += z(c, y, x);
        a[y] /= z.width();
    }
    return a;
}

inline std::vector<double> col_means(const FeatureMap& z, int c)
{
    std::vector<double> b(z.width(), 0.0);
    for (int x = 0; x < z.width(); ++x) {
        for (int y = 0; y < z.height(); ++y) b[x] += z(c, y, x);
        b[x] /= z.height();
    }
    return b;
}

inline double variance(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
}

/// Per-window softmax attention. qkv has 3C channels; heads split C evenly.
inline FeatureMap attention(const FeatureMap& qkv, int heads, int window, const Tensor* bias = nullptr)
{
    const int c = qkv.channels() / 3, dh = c / heads, side = 2 * window - 1;
    FeatureMap out(c, qkv.height(), qkv.width());
    for (int y = 0; y < qkv.height(); ++y)
        for (int x = 0; x < qkv.width(); ++x) {
            const int wy = y / window * window, wx = x / window * window;
            for (int h = 0; h < heads; ++h) {
                std::vector<double> logits;
                std::vector<std::pair<int, int>> keys;
                for (int ky = wy; ky < wy + window; ++ky)
                    for (int kx = wx; kx < wx + window; ++kx) {
                        double s = 0.0;
                        for (int e = 0; e < dh; ++e) s += qkv(h * dh + e, y, x) * qkv(c + h * dh + e, ky, kx);
                        s /= std::sqrt(static_cast<double>(dh));
                        if (bias) {
                            const int dy = (y - wy) - (ky - wy) + window - 1;
                            const int dx = (x - wx) - (kx - wx) + window - 1;
                            s += (*bias)[(static_cast<std::size_t>(h) * side + dy) * side + dx];
                        }
                        logits.push_back(s);
                        keys.emplace_back(ky, kx);
                    }
                const double mx = *std::max_element(logits.begin(), logits.end());
                double z = 0.0;
                for (double& l : logits) z += (l = std::exp(l - mx));
                for (int e = 0; e < dh; ++e) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < keys.size(); ++j)
                        acc += logits[j] / z * qkv(2 * c + h * dh + e, keys[j].first, keys[j].second);
                    out(h * dh + e, y, x) = acc;
                }
            }
        }
    return out;
}

/// Depth-to-space by direct enumeration of output positions.
inline FeatureMap depth_to_space(const FeatureMap& in, int d)
{
    FeatureMap out(in.channels() / (d * d), in.height() * d, in.width() * d);
    for (int c = 0; c < out.channels(); ++c)
        for (int Y = 0; Y < out.height(); ++Y)
            for (int X = 0; X < out.width(); ++X) out(c, Y, X) = in(c * d * d + (Y % d) * d + (X % d), Y / d, X / d);
    return out;
}

inline double max_abs_diff(const FeatureMap& a, const FeatureMap& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double max_abs_diff(const Image& a, const Image& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// Central-difference derivative of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double step)
{
    const double saved = x;
    x = saved + step;
    const double up = f();
    x = saved - step;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * step);
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::sqrt(std::max(na, nb));
    return scale == 0.0 ? 0.0 : std::sqrt(d) / scale;
}

} // namespace oracle
