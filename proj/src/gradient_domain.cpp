#include "o2sr/gradient_domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace o2sr {

GradientField image_gradients(const Image& gray)
{
    if (gray.channels() != 1) throw ShapeError("gradient field needs a single-channel image");
    const int h = gray.height(), w = gray.width();
    GradientField g{Image(h, w, 1, 0.0, gray.id), Image(h, w, 1, 0.0, gray.id)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (gray.at(y, std::min(x + 1, w - 1)) - gray.at(y, std::max(x - 1, 0)));
            const double gy = 0.5 * (gray.at(std::min(y + 1, h - 1), x) - gray.at(std::max(y - 1, 0), x));
            g.magnitude.at(y, x) = std::hypot(gx, gy);
            double a = std::atan2(gy, gx);
            if (a < 0.0) a += std::numbers::pi;
            if (a >= std::numbers::pi) a -= std::numbers::pi;
            g.angle.at(y, x) = a;
        }
    return g;
}

OrientationCells dominant_orientations(const GradientField& g, int cell, int bins)
{
    if (cell < 1 || bins < 1) throw ParameterError("cell size and bin count must be positive");
    const int h = g.magnitude.height(), w = g.magnitude.width();
    OrientationCells out;
    out.rows = (h + cell - 1) / cell;
    out.cols = (w + cell - 1) / cell;
    out.bins = bins;
    out.dominant.assign(static_cast<std::size_t>(out.rows) * out.cols, -1);
    const double width = std::numbers::pi / bins;
    std::vector<double> hist(bins);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            std::fill(hist.begin(), hist.end(), 0.0);
            for (int y = r * cell; y < std::min(h, (r + 1) * cell); ++y)
                for (int x = c * cell; x < std::min(w, (c + 1) * cell); ++x) {
                    const int b = std::min(bins - 1, static_cast<int>(g.angle.at(y, x) / width));
                    hist[b] += g.magnitude.at(y, x);
                }
            const auto best = std::max_element(hist.begin(), hist.end());
            if (*best > 0.0) out.dominant[static_cast<std::size_t>(r) * out.cols + c] = static_cast<int>(best - hist.begin());
        }
    return out;
}

Image magnitude_heatmap(const GradientField& g)
{
    Image out = g.magnitude;
    const double mx = *std::max_element(out.data().begin(), out.data().end());
    if (mx > 0.0)
        for (double& v : out.data()) v /= mx;
    return out;
}

Image orientation_map(const OrientationCells& cells, int height, int width, int cell)
{
    Image out(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int b = cells.at(y / cell, x / cell);
            out.at(y, x) = b < 0 ? 0.0 : static_cast<double>(b + 1) / cells.bins;
        }
    return out;
}

} // namespace o2sr
