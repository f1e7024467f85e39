#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "o2sr/image.hpp"

namespace o2sr {

/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) over all samples; kInfinitePsnr when MSE is 0.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over all fully-inside 11x11 Gaussian windows (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, unit dynamic range. Single channel only.
double ssim(const Image& a, const Image& b);

struct MetricRecord {
    std::string image_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRecord> records;  // sorted by image id
    double mean_psnr = 0.0;              // over finite values; kInfinitePsnr if none
    double mean_ssim = 0.0;
    int scale = 1;
    int border_crop = 0;
    std::vector<std::string> failures;  // one line per file that could not be scored
};

/// Recomputes the aggregate fields from the records.
void aggregate(MetricReport& report);

/// Scores every SR/HR pair matched by stem on luminance after cropping
/// `border_crop` pixels (negative means `scale`). Per-file problems are
/// collected in `failures` and do not stop the run.
MetricReport evaluate_pairs(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir, int scale,
                            int border_crop = -1);

/// "inf" or fixed-point text.
std::string format_psnr(double db);

/// CSV `image_id,psnr_db,ssim` plus a trailing AGGREGATE row, and a
/// `<path>.manifest` next to it.
void write_report(const MetricReport& report, const std::filesystem::path& csv_path);

} // namespace o2sr
