#include "o2sr/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace o2sr {

double BlurKernel::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

MotionVector::MotionVector(double length, double orientation)
    : length_(length),
      orientation_(orientation),
      u_(length * std::cos(orientation)),
      v_(length * std::sin(orientation))
{
    if (!(length >= 0.0)) throw ParameterError("motion length must be >= 0");
    if (!(orientation >= 0.0 && orientation < std::numbers::pi))
        throw ParameterError("motion orientation must lie in [0, pi)");
}

BlurKernel delta_kernel() { return BlurKernel{}; }

namespace {

void check_odd(int size)
{
    if (size < 1 || size % 2 == 0) throw ParameterError("kernel size must be odd and positive, got " + std::to_string(size));
}

void normalize(BlurKernel& k)
{
    const double s = k.sum();
    for (double& w : k.weights) w /= s;
}

// Parametric interval of the segment p0 + t*d (t in [0,1]) inside a box.
double clipped_fraction(double x0, double y0, double dx, double dy, double xmin, double xmax, double ymin,
                        double ymax)
{
    double t0 = 0.0, t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {x0 - xmin, xmax - x0, y0 - ymin, ymax - y0};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return 0.0;
            continue;
        }
        const double r = q[i] / p[i];
        if (p[i] < 0.0)
            t0 = std::max(t0, r);
        else
            t1 = std::min(t1, r);
        if (t0 >= t1) return 0.0;
    }
    return t1 - t0;
}

} // namespace

BlurKernel gaussian_kernel(double sigma, int size)
{
    check_odd(size);
    if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be > 0");
    BlurKernel k;
    k.size = size;
    k.kind = KernelKind::gaussian;
    k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
    const int r = size / 2;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double di = i - r, dj = j - r;
            k.weights[static_cast<std::size_t>(i) * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
        }
    normalize(k);
    return k;
}

BlurKernel motion_kernel(const MotionVector& mv, int size)
{
    check_odd(size);
    if (mv.length() > size)
        throw KernelOverflowError("motion length " + std::to_string(mv.length()) + " exceeds kernel size " +
                                  std::to_string(size));
    if (mv.length() == 0.0) {
        BlurKernel k;
        k.size = size;
        k.kind = KernelKind::motion;
        k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
        k.weights[static_cast<std::size_t>(size / 2) * size + size / 2] = 1.0;
        return k;
    }
    BlurKernel k;
    k.size = size;
    k.kind = KernelKind::motion;
    k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
    const int r = size / 2;
    const double x0 = -mv.u() / 2.0, y0 = -mv.v() / 2.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double cx = j - r, cy = i - r;
            const double f = clipped_fraction(x0, y0, mv.u(), mv.v(), cx - 0.5, cx + 0.5, cy - 0.5, cy + 0.5);
            k.weights[static_cast<std::size_t>(i) * size + j] = f * mv.length();
        }
    normalize(k);
    return k;
}

BlurKernel compose_kernels(const BlurKernel& a, const BlurKernel& b)
{
    BlurKernel k;
    k.size = a.size + b.size - 1;
    k.kind = KernelKind::composite;
    k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
    for (int ai = 0; ai < a.size; ++ai)
        for (int aj = 0; aj < a.size; ++aj)
            for (int bi = 0; bi < b.size; ++bi)
                for (int bj = 0; bj < b.size; ++bj)
                    k.weights[static_cast<std::size_t>(ai + bi) * k.size + aj + bj] += a.at(ai, aj) * b.at(bi, bj);
    normalize(k);
    return k;
}

Image convolve2d(const Image& img, const BlurKernel& kernel)
{
    if (kernel.size > img.height() || kernel.size > img.width())
        throw ShapeError("kernel " + std::to_string(kernel.size) + "x" + std::to_string(kernel.size) +
                         " larger than image " + img.dims_string());
    const int r = kernel.size / 2;
    const int h = img.height(), w = img.width();
    Image out(h, w, img.channels(), 0.0, img.id);
    std::vector<int> col_index(static_cast<std::size_t>(w + 2 * r));
    for (int x = -r; x < w + r; ++x) col_index[x + r] = reflect_index(x, w);

    for (int c = 0; c < img.channels(); ++c) {
        const auto src = img.plane(c);
        auto dst = out.plane(c);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ki = 0; ki < kernel.size; ++ki) {
                    const double* row = src.data() + static_cast<std::size_t>(reflect_index(y + ki - r, h)) * w;
                    for (int kj = 0; kj < kernel.size; ++kj) acc += kernel.at(ki, kj) * row[col_index[x + kj]];
                }
                dst[static_cast<std::size_t>(y) * w + x] = acc;
            }
        }
    }
    return out;
}

Image downsample(const Image& img, int factor, DownsampleMode mode)
{
    if (factor < 1) throw ParameterError("downsample factor must be >= 1");
    if (img.height() % factor != 0 || img.width() % factor != 0)
        throw ShapeError("image " + img.dims_string() + " not divisible by " + std::to_string(factor));
    if (factor == 1) return img;
    if (mode == DownsampleMode::bicubic) return bicubic_resample(img, Rational{1, factor});
    Image out(img.height() / factor, img.width() / factor, img.channels(), 0.0, img.id);
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x) out.at(y, x, c) = img.at(y * factor, x * factor, c);
    return out;
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
    if (sigma == 0.0) return img;
    Image out = img;
    Rng rng(seed);
    for (double& v : out.data()) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

BlurKernel KernelSpec::build() const
{
    const bool g = gaussian_sigma > 0.0;
    const bool m = motion_length > 0.0;
    if (g && m)
        return compose_kernels(gaussian_kernel(gaussian_sigma, gaussian_size),
                               motion_kernel(MotionVector(motion_length, motion_angle), motion_size));
    if (g) return gaussian_kernel(gaussian_sigma, gaussian_size);
    if (m) return motion_kernel(MotionVector(motion_length, motion_angle), motion_size);
    return delta_kernel();
}

std::string KernelSpec::kind_name() const
{
    const bool g = gaussian_sigma > 0.0;
    const bool m = motion_length > 0.0;
    if (g && m) return "gaussian+motion";
    if (g) return "gaussian";
    if (m) return "motion";
    return "delta";
}

void DegradationConfig::validate() const
{
    if (scale < 1) throw ParameterError("degradation scale must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
    if (!(kernel.gaussian_sigma >= 0.0)) throw ParameterError("gaussian sigma must be >= 0");
    if (!(kernel.motion_length >= 0.0)) throw ParameterError("motion length must be >= 0");
}

Image degrade(const Image& hr, const DegradationConfig& cfg)
{
    cfg.validate();
    if (hr.height() % cfg.scale != 0 || hr.width() % cfg.scale != 0)
        throw ShapeError("image " + hr.dims_string() + " not divisible by scale " + std::to_string(cfg.scale));
    Image blurred = convolve2d(hr, cfg.kernel.build());
    Image lr = downsample(blurred, cfg.scale, cfg.downsample_mode);
    return add_noise(lr, cfg.noise_sigma, cfg.seed);
}

DegradationConfig degradation_preset(const std::string& name, int scale)
{
    DegradationConfig cfg;
    cfg.scale = scale;
    cfg.downsample_mode = DownsampleMode::bicubic;
    if (name == "mini") {
        cfg.kernel.gaussian_sigma = 1.2;
        cfg.kernel.gaussian_size = 9;
        cfg.noise_sigma = 0.01;
    } else if (name == "plus") {
        cfg.kernel.gaussian_sigma = 2.0;
        cfg.kernel.gaussian_size = 13;
        cfg.kernel.motion_length = 3.0;
        cfg.kernel.motion_angle = std::numbers::pi / 4.0;
        cfg.kernel.motion_size = 5;
        cfg.noise_sigma = 0.03;
    } else {
        throw ConfigError("unknown degradation preset \"" + name + "\"");
    }
    return cfg;
}

std::string to_string(DownsampleMode m) { return m == DownsampleMode::bicubic ? "bicubic" : "stride"; }

std::string to_string(KernelKind k)
{
    switch (k) {
    case KernelKind::delta: return "delta";
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::motion: return "motion";
    case KernelKind::composite: return "composite";
    }
    return "unknown";
}

} // namespace o2sr
