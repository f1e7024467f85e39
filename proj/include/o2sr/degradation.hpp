#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "o2sr/image.hpp"

namespace o2sr {

enum class KernelKind { delta, gaussian, motion, composite };

/// Nonnegative k x k blur kernel (k odd) summing to one.
struct BlurKernel {
    int size = 1;
    std::vector<double> weights{1.0};
    KernelKind kind = KernelKind::delta;

    double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * size + col]; }
    double sum() const;
};

/// Blur trajectory of length `length` pixels at angle `orientation` radians
/// in [0, pi). Cartesian components are fixed at construction.
class MotionVector {
public:
    MotionVector(double length, double orientation);

    double length() const { return length_; }
    double orientation() const { return orientation_; }
    double u() const { return u_; }  // column (x) component
    double v() const { return v_; }  // row (y) component

private:
    double length_;
    double orientation_;
    double u_;
    double v_;
};

BlurKernel delta_kernel();
BlurKernel gaussian_kernel(double sigma, int size);

/// Centered segment from -(u,v)/2 to +(u,v)/2; each cell weighted by the
/// exact length of the segment inside it.
BlurKernel motion_kernel(const MotionVector& mv, int size);

/// Full 2-D convolution of two kernels (sizes add minus one).
BlurKernel compose_kernels(const BlurKernel& a, const BlurKernel& b);

/// Same-size correlation with reflect padding.
Image convolve2d(const Image& img, const BlurKernel& kernel);

enum class DownsampleMode { bicubic, stride };

Image downsample(const Image& img, int factor, DownsampleMode mode);

/// Adds i.i.d. N(0, sigma^2) noise then clips to [0, 1].
Image add_noise(const Image& img, double sigma, std::uint64_t seed);

struct KernelSpec {
    double gaussian_sigma = 0.0;  // 0 disables the Gaussian component
    int gaussian_size = 1;
    double motion_length = 0.0;  // 0 disables the motion component
    double motion_angle = 0.0;
    int motion_size = 5;

    BlurKernel build() const;
    std::string kind_name() const;
};

struct DegradationConfig {
    KernelSpec kernel;
    int scale = 4;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    DownsampleMode downsample_mode = DownsampleMode::bicubic;

    void validate() const;
};

/// Blur, then downsample, then add noise.
Image degrade(const Image& hr, const DegradationConfig& cfg);

/// Named stand-ins for the two test-set degradation levels.
DegradationConfig degradation_preset(const std::string& name, int scale = 4);

std::string to_string(DownsampleMode m);
std::string to_string(KernelKind k);

} // namespace o2sr
