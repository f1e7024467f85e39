#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "o2sr/common.hpp"
#include "o2sr/tensor.hpp"

namespace o2sr {

enum class ValueRange { unit, eight_bit };

/// Grayscale or RGB image held as unit-range doubles, channel-planar.
/// Quantization happens only when saving.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels = 1, double fill = 0.0, std::string id = {});

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> plane(int c);
    std::span<const double> plane(int c) const;

    bool same_dims(const Image& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }

    /// True if every pixel lies inside the declared value range.
    bool in_range() const;

    std::string dims_string() const;

    std::string id;
    ValueRange range = ValueRange::unit;

private:
    std::size_t index(int y, int x, int c) const
    {
        return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
    }

    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<double> data_;
};

FeatureMap to_feature_map(const Image& img);
Image to_image(const FeatureMap& m, std::string id = {});

/// Loads an 8/16-bit grayscale or 8-bit RGB PNG, normalized to [0, 1].
Image load_image(const std::filesystem::path& path);

/// Writes a PNG at the given bit depth (8 or 16). Values are clamped to
/// [0, 1] and rounded to the nearest code.
void save_image(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

/// BT.601 luma. Grayscale input is returned unchanged.
Image to_luminance(const Image& img);

struct Rational {
    long num = 1;
    long den = 1;
};

/// Bicubic resampling (a = -0.5, reflect boundary, pixel-center aligned).
/// Output dims are floor(input dims * factor).
Image bicubic_resample(const Image& img, Rational factor);

/// Crops `border` pixels from every edge.
Image crop_border(const Image& img, int border);

/// Crops an axis-aligned window.
Image crop(const Image& img, int top, int left, int height, int width);

/// Sorted list of *.png files in a directory (non-recursive).
std::vector<std::filesystem::path> list_png(const std::filesystem::path& dir);

struct ImagePair {
    Image lr;
    Image hr;
    int scale = 1;
};

/// LR/HR pairs matched by filename stem and sorted lexicographically.
struct PairedDataset {
    std::vector<ImagePair> pairs;
    std::filesystem::path lr_root;
    std::filesystem::path hr_root;
    int scale = 1;

    std::size_t size() const { return pairs.size(); }
};

PairedDataset build_paired_dataset(const std::filesystem::path& lr_dir,
                                   const std::filesystem::path& hr_dir, int scale);

/// Opens the `<root>/hr`, `<root>/lr_x<d>` layout.
PairedDataset open_paired_root(const std::filesystem::path& root, int scale);

std::filesystem::path lr_dir_name(const std::filesystem::path& root, int scale);

/// Synthetic radiograph-like phantom: soft-tissue background with bone
/// shafts (bright cortex, textured medulla) and a rectangular marker.
Image synthesize_radiograph(int height, int width, std::uint64_t seed, std::string id = {});

} // namespace o2sr
