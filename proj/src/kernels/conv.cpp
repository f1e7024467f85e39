#include "o2sr/kernels.hpp"

#include <string>

namespace o2sr::kernels {

namespace {

struct ConvDims {
    int in_c, out_c, k, r, icg, ocg;
};

ConvDims check_conv(const FeatureMap& in, const Tensor& weight, int groups)
{
    if (weight.shape().size() != 4) throw ShapeError("conv weight must be 4-D");
    const int out_c = weight.dim(0), icg = weight.dim(1), k = weight.dim(2);
    if (weight.dim(3) != k || k % 2 == 0) throw ShapeError("conv kernel must be square and odd");
    if (groups < 1 || in.channels() % groups != 0 || out_c % groups != 0)
        throw ShapeError("conv groups " + std::to_string(groups) + " incompatible with channels");
    if (icg * groups != in.channels())
        throw ShapeError("conv expects " + std::to_string(icg * groups) + " input channels, got " +
                         std::to_string(in.channels()));
    return {in.channels(), out_c, k, k / 2, icg, out_c / groups};
}

inline double w_at(const Tensor& w, int o, int ci, int ky, int kx, int icg, int k)
{
    return w[((static_cast<std::size_t>(o) * icg + ci) * k + ky) * k + kx];
}

} // namespace

FeatureMap pad(const FeatureMap& in, int r, Padding mode)
{
    if (r == 0) return in;
    const int h = in.height(), w = in.width();
    FeatureMap out(in.channels(), h + 2 * r, w + 2 * r);
    for (int c = 0; c < in.channels(); ++c)
        for (int y = -r; y < h + r; ++y)
            for (int x = -r; x < w + r; ++x) {
                double v = 0.0;
                if (mode == Padding::reflect)
                    v = in(c, reflect_index(y, h), reflect_index(x, w));
                else if (y >= 0 && y < h && x >= 0 && x < w)
                    v = in(c, y, x);
                out(c, y + r, x + r) = v;
            }
    return out;
}

void unpad_accumulate(const FeatureMap& grad_padded, int r, Padding mode, FeatureMap& grad_in)
{
    const int h = grad_in.height(), w = grad_in.width();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < grad_in.channels(); ++c)
        for (int y = -r; y < h + r; ++y)
            for (int x = -r; x < w + r; ++x) {
                const double g = grad_padded(c, y + r, x + r);
                if (mode == Padding::reflect)
                    grad_in(c, reflect_index(y, h), reflect_index(x, w)) += g;
                else if (y >= 0 && y < h && x >= 0 && x < w)
                    grad_in(c, y, x) += g;
            }
}

FeatureMap conv2d_forward(const FeatureMap& in, const Tensor& weight, const Tensor& bias, int groups,
                          Padding mode)
{
    const ConvDims d = check_conv(in, weight, groups);
    const int h = in.height(), w = in.width();
    const FeatureMap padded = pad(in, d.r, mode);
    const int wp = padded.width();
    FeatureMap out(d.out_c, h, w);

#pragma omp parallel for schedule(static)
    for (int o = 0; o < d.out_c; ++o) {
        const int g = o / d.ocg;
        double* dst = out.plane(o).data();
        const double b = bias.numel() ? bias[o] : 0.0;
        for (std::size_t i = 0; i < out.plane_size(); ++i) dst[i] = b;
        for (int ci = 0; ci < d.icg; ++ci) {
            const double* src = padded.plane(g * d.icg + ci).data();
            for (int ky = 0; ky < d.k; ++ky)
                for (int kx = 0; kx < d.k; ++kx) {
                    const double wv = w_at(weight, o, ci, ky, kx, d.icg, d.k);
                    for (int y = 0; y < h; ++y) {
                        double* orow = dst + static_cast<std::size_t>(y) * w;
                        const double* irow = src + static_cast<std::size_t>(y + ky) * wp + kx;
                        for (int x = 0; x < w; ++x) orow[x] += wv * irow[x];
                    }
                }
        }
    }
    return out;
}

void conv2d_backward(const FeatureMap& in, const Tensor& weight, int groups, Padding mode,
                     const FeatureMap& grad_out, FeatureMap* grad_in, Tensor* grad_weight, Tensor* grad_bias)
{
    const ConvDims d = check_conv(in, weight, groups);
    const int h = in.height(), w = in.width();
    if (grad_out.channels() != d.out_c || grad_out.height() != h || grad_out.width() != w)
        throw ShapeError("conv grad_out shape mismatch");

    const FeatureMap padded = pad(in, d.r, mode);
    const int hp = padded.height(), wp = padded.width();

    if (grad_bias) {
        for (int o = 0; o < d.out_c; ++o) {
            double s = 0.0;
            for (double g : grad_out.plane(o)) s += g;
            (*grad_bias)[o] += s;
        }
    }

    if (grad_weight) {
#pragma omp parallel for schedule(static)
        for (int o = 0; o < d.out_c; ++o) {
            const int g = o / d.ocg;
            const double* go = grad_out.plane(o).data();
            for (int ci = 0; ci < d.icg; ++ci) {
                const double* src = padded.plane(g * d.icg + ci).data();
                for (int ky = 0; ky < d.k; ++ky)
                    for (int kx = 0; kx < d.k; ++kx) {
                        double s = 0.0;
                        for (int y = 0; y < h; ++y) {
                            const double* grow = go + static_cast<std::size_t>(y) * w;
                            const double* irow = src + static_cast<std::size_t>(y + ky) * wp + kx;
                            for (int x = 0; x < w; ++x) s += grow[x] * irow[x];
                        }
                        (*grad_weight)[((static_cast<std::size_t>(o) * d.icg + ci) * d.k + ky) * d.k + kx] += s;
                    }
            }
        }
    }

    if (grad_in) {
        FeatureMap gpad(d.in_c, hp, wp);
#pragma omp parallel for schedule(static)
        for (int cin = 0; cin < d.in_c; ++cin) {
            const int g = cin / d.icg, ci = cin % d.icg;
            double* dst = gpad.plane(cin).data();
            for (int o = g * d.ocg; o < (g + 1) * d.ocg; ++o) {
                const double* go = grad_out.plane(o).data();
                for (int ky = 0; ky < d.k; ++ky)
                    for (int kx = 0; kx < d.k; ++kx) {
                        const double wv = w_at(weight, o, ci, ky, kx, d.icg, d.k);
                        for (int y = 0; y < h; ++y) {
                            const double* grow = go + static_cast<std::size_t>(y) * w;
                            double* prow = dst + static_cast<std::size_t>(y + ky) * wp + kx;
                            for (int x = 0; x < w; ++x) prow[x] += wv * grow[x];
                        }
                    }
            }
        }
        unpad_accumulate(gpad, d.r, mode, *grad_in);
    }
}

// ============================================================================
// Serial reference
// ============================================================================

namespace reference {

namespace {

bool source_index(int& y, int& x, int h, int w, Padding mode)
{
    if (mode == Padding::reflect) {
        y = reflect_index(y, h);
        x = reflect_index(x, w);
        return true;
    }
    return y >= 0 && y < h && x >= 0 && x < w;
}

} // namespace

FeatureMap conv2d_forward(const FeatureMap& in, const Tensor& weight, const Tensor& bias, int groups,
                          Padding mode)
{
    const ConvDims d = check_conv(in, weight, groups);
    const int h = in.height(), w = in.width();
    FeatureMap out(d.out_c, h, w);
    for (int o = 0; o < d.out_c; ++o) {
        const int g = o / d.ocg;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias.numel() ? bias[o] : 0.0;
                for (int ci = 0; ci < d.icg; ++ci)
                    for (int ky = 0; ky < d.k; ++ky)
                        for (int kx = 0; kx < d.k; ++kx) {
                            int sy = y + ky - d.r, sx = x + kx - d.r;
                            if (!source_index(sy, sx, h, w, mode)) continue;
                            acc += w_at(weight, o, ci, ky, kx, d.icg, d.k) * in(g * d.icg + ci, sy, sx);
                        }
                out(o, y, x) = acc;
            }
    }
    return out;
}

void conv2d_backward(const FeatureMap& in, const Tensor& weight, int groups, Padding mode,
                     const FeatureMap& grad_out, FeatureMap* grad_in, Tensor* grad_weight, Tensor* grad_bias)
{
    const ConvDims d = check_conv(in, weight, groups);
    const int h = in.height(), w = in.width();
    for (int o = 0; o < d.out_c; ++o) {
        const int g = o / d.ocg;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double go = grad_out(o, y, x);
                if (grad_bias) (*grad_bias)[o] += go;
                for (int ci = 0; ci < d.icg; ++ci)
                    for (int ky = 0; ky < d.k; ++ky)
                        for (int kx = 0; kx < d.k; ++kx) {
                            int sy = y + ky - d.r, sx = x + kx - d.r;
                            if (!source_index(sy, sx, h, w, mode)) continue;
                            const int cin = g * d.icg + ci;
                            if (grad_weight)
                                (*grad_weight)[((static_cast<std::size_t>(o) * d.icg + ci) * d.k + ky) * d.k + kx] +=
                                    go * in(cin, sy, sx);
                            if (grad_in) (*grad_in)(cin, sy, sx) += go * w_at(weight, o, ci, ky, kx, d.icg, d.k);
                        }
            }
    }
}

} // namespace reference

} // namespace o2sr::kernels
