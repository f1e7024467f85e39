#include "o2sr/orientation.hpp"

#include <algorithm>
#include <functional>
#include <string>

namespace o2sr {

namespace {

double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_variance(const std::vector<double>& v)
{
    if (std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end()) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

} // namespace

std::vector<std::vector<double>> strip_mean_width(const FeatureMap& z)
{
    std::vector<std::vector<double>> out(z.channels(), std::vector<double>(z.height()));
    for (int c = 0; c < z.channels(); ++c)
        for (int y = 0; y < z.height(); ++y) {
            double s = 0.0;
            for (int x = 0; x < z.width(); ++x) s += z(c, y, x);
            out[c][y] = s / z.width();
        }
    return out;
}

std::vector<std::vector<double>> strip_mean_height(const FeatureMap& z)
{
    std::vector<std::vector<double>> out(z.channels(), std::vector<double>(z.width(), 0.0));
    for (int c = 0; c < z.channels(); ++c) {
        for (int y = 0; y < z.height(); ++y)
            for (int x = 0; x < z.width(); ++x) out[c][x] += z(c, y, x);
        for (double& v : out[c]) v /= z.height();
    }
    return out;
}

std::vector<double> orientation_v(const FeatureMap& z)
{
    const auto rows = strip_mean_width(z);
    std::vector<double> out(rows.size());
    for (std::size_t c = 0; c < rows.size(); ++c) out[c] = population_variance(rows[c]);
    return out;
}

std::vector<double> orientation_h(const FeatureMap& z)
{
    const auto cols = strip_mean_height(z);
    std::vector<double> out(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) out[c] = population_variance(cols[c]);
    return out;
}

OrientationDescriptor orientation_operator(const FeatureMap& z) { return {orientation_v(z), orientation_h(z)}; }

FeatureMap modulate(const FeatureMap& m, const OrientationDescriptor& desc)
{
    if (desc.channels() != m.channels() || desc.h_stats.size() != desc.v_stats.size())
        throw ShapeError("descriptor has " + std::to_string(desc.channels()) + " channels, map has " +
                         std::to_string(m.channels()));
    FeatureMap out(m.channels(), m.height(), m.width());
    for (int c = 0; c < m.channels(); ++c) {
        const double g = desc.v_stats[c] + desc.h_stats[c];
        const auto src = m.plane(c);
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * g;
    }
    return out;
}

FeatureMap orientation_backward(const FeatureMap& z, const std::vector<double>& gv, const std::vector<double>& gh)
{
    const auto rows = strip_mean_width(z);
    const auto cols = strip_mean_height(z);
    const double norm = 2.0 / (static_cast<double>(z.height()) * z.width());
    FeatureMap out(z.channels(), z.height(), z.width());
    for (int c = 0; c < z.channels(); ++c) {
        const double ra = mean(rows[c]), ca = mean(cols[c]);
        for (int y = 0; y < z.height(); ++y)
            for (int x = 0; x < z.width(); ++x)
                out(c, y, x) = norm * (gv[c] * (rows[c][y] - ra) + gh[c] * (cols[c][x] - ca));
    }
    return out;
}

} // namespace o2sr
