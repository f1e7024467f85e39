#pragma once

#include <vector>

#include "o2sr/image.hpp"

// Simplified HOG-style inspection: per-pixel gradient magnitude and the
// dominant unsigned orientation of each cell.
namespace o2sr {

struct GradientField {
    Image magnitude;
    Image angle;  // unsigned, radians in [0, pi)
};

/// Central differences with replicated borders on a single-channel image.
GradientField image_gradients(const Image& gray);

struct OrientationCells {
    int rows = 0;
    int cols = 0;
    int bins = 8;
    std::vector<int> dominant;  // row-major; -1 for cells with no gradient energy

    int at(int r, int c) const { return dominant[static_cast<std::size_t>(r) * cols + c]; }
};

/// Magnitude-weighted orientation histograms over cell x cell tiles (partial
/// tiles at the right/bottom edge included), hard-binned.
OrientationCells dominant_orientations(const GradientField& g, int cell = 8, int bins = 8);

/// Magnitude scaled so the maximum is 1; all zeros for flat images.
Image magnitude_heatmap(const GradientField& g);

/// Full-resolution map filling each cell with (bin + 1) / bins, 0 if empty.
Image orientation_map(const OrientationCells& cells, int height, int width, int cell = 8);

} // namespace o2sr
