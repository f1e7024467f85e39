#pragma once

#include <vector>

#include "o2sr/tensor.hpp"

namespace o2sr {

/// Per-channel directional variances of a feature map.
struct OrientationDescriptor {
    std::vector<double> v_stats;  // variance of the row-mean profile
    std::vector<double> h_stats;  // variance of the column-mean profile

    int channels() const { return static_cast<int>(v_stats.size()); }
};

/// Row means: result[c][y] = mean over x of z(c, y, x).
std::vector<std::vector<double>> strip_mean_width(const FeatureMap& z);

/// Column means: result[c][x] = mean over y of z(c, y, x).
std::vector<std::vector<double>> strip_mean_height(const FeatureMap& z);

/// Population variance of each channel's row-mean profile.
std::vector<double> orientation_v(const FeatureMap& z);

/// Population variance of each channel's column-mean profile.
std::vector<double> orientation_h(const FeatureMap& z);

OrientationDescriptor orientation_operator(const FeatureMap& z);

/// out(c, y, x) = m(c, y, x) * (v_stats[c] + h_stats[c]).
FeatureMap modulate(const FeatureMap& m, const OrientationDescriptor& desc);

/// Gradient of sum_c (gv[c] * O_v(z)[c] + gh[c] * O_h(z)[c]) with respect to z.
FeatureMap orientation_backward(const FeatureMap& z, const std::vector<double>& gv,
                                const std::vector<double>& gh);

} // namespace o2sr
