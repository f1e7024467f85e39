#include "o2sr/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

namespace o2sr {

namespace fs = std::filesystem;

Image::Image(int height, int width, int channels, double fill, std::string id_)
    : id(std::move(id_)), h_(height), w_(width), c_(channels)
{
    if (height < 1 || width < 1) throw ShapeError("image dims must be positive, got " + dims_string());
    if (channels != 1 && channels != 3)
        throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(channels));
    data_.assign(static_cast<std::size_t>(h_) * w_ * c_, fill);
}

std::span<double> Image::plane(int c)
{
    const std::size_t n = static_cast<std::size_t>(h_) * w_;
    return {data_.data() + c * n, n};
}

std::span<const double> Image::plane(int c) const
{
    const std::size_t n = static_cast<std::size_t>(h_) * w_;
    return {data_.data() + c * n, n};
}

bool Image::in_range() const
{
    const double hi = range == ValueRange::unit ? 1.0 : 255.0;
    return std::all_of(data_.begin(), data_.end(), [hi](double v) { return v >= 0.0 && v <= hi; });
}

std::string Image::dims_string() const
{
    return std::to_string(h_) + "x" + std::to_string(w_) + "x" + std::to_string(c_);
}

FeatureMap to_feature_map(const Image& img)
{
    FeatureMap m(img.channels(), img.height(), img.width());
    std::copy(img.data().begin(), img.data().end(), m.data().begin());
    return m;
}

Image to_image(const FeatureMap& m, std::string id)
{
    Image img(m.height(), m.width(), m.channels(), 0.0, std::move(id));
    std::copy(m.data().begin(), m.data().end(), img.data().begin());
    return img;
}

// ============================================================================
// PNG I/O
// ============================================================================

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg)
{
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    if (buf) *buf = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

} // namespace

Image load_image(const fs::path& path)
{
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());

    std::array<unsigned char, 8> sig{};
    if (std::fread(sig.data(), 1, sig.size(), fp.get()) != sig.size() || png_sig_cmp(sig.data(), 0, 8) != 0)
        throw IoError("not a PNG file: " + path.string());

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }

    std::vector<unsigned char> raw;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG " + path.string() + ": " + err);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    int channels = 0;
    bool supported = false;
    if (color_type == PNG_COLOR_TYPE_GRAY && (bit_depth == 8 || bit_depth == 16)) {
        channels = 1;
        supported = true;
    } else if (color_type == PNG_COLOR_TYPE_RGB && bit_depth == 8) {
        channels = 3;
        supported = true;
    }
    if (!supported) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG format in " + path.string() + " (color type " +
                          std::to_string(color_type) + ", bit depth " + std::to_string(bit_depth) +
                          "); expected 8/16-bit grayscale or 8-bit RGB");
    }
    if (bit_depth == 16) png_set_swap(png);  // native little-endian 16-bit words

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(height), static_cast<int>(width), channels, 0.0, path.stem().string());
    const double scale = bit_depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < img.height(); ++y) {
        const unsigned char* row = rows[y];
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t k = static_cast<std::size_t>(x) * channels + c;
                double code = 0.0;
                if (bit_depth == 16) {
                    std::uint16_t v = 0;
                    std::memcpy(&v, row + 2 * k, 2);
                    code = v;
                } else {
                    code = row[k];
                }
                img.at(y, x, c) = code / scale;
            }
        }
    }
    return img;
}

void save_image(const Image& img, const fs::path& path, int bit_depth)
{
    if (bit_depth != 8 && bit_depth != 16) throw ParameterError("bit depth must be 8 or 16");
    if (img.empty()) throw ShapeError("cannot save an empty image");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path.string());

    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }

    const int channels = img.channels();
    const int bytes_per_sample = bit_depth / 8;
    const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * channels * bytes_per_sample;
    std::vector<unsigned char> raw(row_bytes * img.height());
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < img.height(); ++y) {
        unsigned char* row = raw.data() + y * row_bytes;
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                const auto code = static_cast<unsigned>(std::lround(v * maxv));
                const std::size_t k = static_cast<std::size_t>(x) * channels + c;
                if (bit_depth == 16) {
                    row[2 * k] = static_cast<unsigned char>(code >> 8);  // PNG is big-endian
                    row[2 * k + 1] = static_cast<unsigned char>(code & 0xFF);
                } else {
                    row[k] = static_cast<unsigned char>(code);
                }
            }
        }
    }
    std::vector<png_bytep> rows(img.height());
    for (int y = 0; y < img.height(); ++y) rows[y] = raw.data() + y * row_bytes;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string() + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
                 bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw IoError("failed writing " + path.string());
}

// ============================================================================
// Color and resampling
// ============================================================================

Image to_luminance(const Image& img)
{
    if (img.channels() == 1) return img;
    if (img.channels() != 3) throw ShapeError("luminance needs 1 or 3 channels");
    Image y(img.height(), img.width(), 1, 0.0, img.id);
    const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
    auto out = y.plane(0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return y;
}

namespace {

double cubic_weight(double x)
{
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

struct Taps {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
};

std::vector<Taps> make_taps(int in_size, int out_size, Rational f)
{
    std::vector<Taps> taps(out_size);
    const double inv = static_cast<double>(f.den) / static_cast<double>(f.num);
    for (int o = 0; o < out_size; ++o) {
        const double src = (o + 0.5) * inv - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        const int i0 = static_cast<int>(base);
        for (int k = 0; k < 4; ++k) {
            taps[o].index[k] = reflect_index(i0 - 1 + k, in_size);
            taps[o].weight[k] = cubic_weight(t - (k - 1));
        }
    }
    return taps;
}

} // namespace

Image bicubic_resample(const Image& img, Rational factor)
{
    if (factor.num <= 0 || factor.den <= 0) throw ShapeError("resample factor must be positive");
    const long oh = static_cast<long>(img.height()) * factor.num / factor.den;
    const long ow = static_cast<long>(img.width()) * factor.num / factor.den;
    if (oh < 1 || ow < 1)
        throw ShapeError("resample of " + img.dims_string() + " by " + std::to_string(factor.num) + "/" +
                         std::to_string(factor.den) + " is degenerate");

    const auto ty = make_taps(img.height(), static_cast<int>(oh), factor);
    const auto tx = make_taps(img.width(), static_cast<int>(ow), factor);

    Image out(static_cast<int>(oh), static_cast<int>(ow), img.channels(), 0.0, img.id);
    std::vector<double> tmp(static_cast<std::size_t>(img.height()) * ow);
    for (int c = 0; c < img.channels(); ++c) {
        const auto src = img.plane(c);
        for (int y = 0; y < img.height(); ++y) {
            const double* row = src.data() + static_cast<std::size_t>(y) * img.width();
            for (int x = 0; x < ow; ++x) {
                const Taps& t = tx[x];
                tmp[static_cast<std::size_t>(y) * ow + x] = t.weight[0] * row[t.index[0]] + t.weight[1] * row[t.index[1]] +
                                                            t.weight[2] * row[t.index[2]] + t.weight[3] * row[t.index[3]];
            }
        }
        auto dst = out.plane(c);
        for (int y = 0; y < oh; ++y) {
            const Taps& t = ty[y];
            for (int x = 0; x < ow; ++x) {
                dst[static_cast<std::size_t>(y) * ow + x] =
                    t.weight[0] * tmp[static_cast<std::size_t>(t.index[0]) * ow + x] +
                    t.weight[1] * tmp[static_cast<std::size_t>(t.index[1]) * ow + x] +
                    t.weight[2] * tmp[static_cast<std::size_t>(t.index[2]) * ow + x] +
                    t.weight[3] * tmp[static_cast<std::size_t>(t.index[3]) * ow + x];
            }
        }
    }
    return out;
}

Image crop(const Image& img, int top, int left, int height, int width)
{
    if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > img.height() || left + width > img.width())
        throw ShapeError("crop window out of bounds for " + img.dims_string());
    Image out(height, width, img.channels(), 0.0, img.id);
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(y, x, c) = img.at(top + y, left + x, c);
    return out;
}

Image crop_border(const Image& img, int border)
{
    if (border <= 0) return img;
    return crop(img, border, border, img.height() - 2 * border, img.width() - 2 * border);
}

// ============================================================================
// Paired dataset
// ============================================================================

std::vector<fs::path> list_png(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

PairedDataset build_paired_dataset(const fs::path& lr_dir, const fs::path& hr_dir, int scale)
{
    if (scale < 1) throw ParameterError("scale must be >= 1");
    std::map<std::string, fs::path> lr_by_stem, hr_by_stem;
    for (const auto& p : list_png(lr_dir)) lr_by_stem[p.stem().string()] = p;
    for (const auto& p : list_png(hr_dir)) hr_by_stem[p.stem().string()] = p;

    for (const auto& [stem, _] : lr_by_stem)
        if (!hr_by_stem.count(stem)) throw PairingError("no HR counterpart for \"" + stem + "\"");
    for (const auto& [stem, _] : hr_by_stem)
        if (!lr_by_stem.count(stem)) throw PairingError("no LR counterpart for \"" + stem + "\"");

    PairedDataset ds;
    ds.lr_root = lr_dir;
    ds.hr_root = hr_dir;
    ds.scale = scale;
    for (const auto& [stem, hr_path] : hr_by_stem) {
        ImagePair pair{load_image(lr_by_stem.at(stem)), load_image(hr_path), scale};
        if (pair.hr.height() != pair.lr.height() * scale || pair.hr.width() != pair.lr.width() * scale)
            throw ContractError("\"" + stem + "\": lr " + std::to_string(pair.lr.height()) + "x" +
                                std::to_string(pair.lr.width()) + " x" + std::to_string(scale) + " != hr " +
                                std::to_string(pair.hr.height()) + "x" + std::to_string(pair.hr.width()));
        ds.pairs.push_back(std::move(pair));
    }
    return ds;
}

fs::path lr_dir_name(const fs::path& root, int scale) { return root / ("lr_x" + std::to_string(scale)); }

PairedDataset open_paired_root(const fs::path& root, int scale)
{
    return build_paired_dataset(lr_dir_name(root, scale), root / "hr", scale);
}

// ============================================================================
// Phantoms
// ============================================================================

Image synthesize_radiograph(int height, int width, std::uint64_t seed, std::string id)
{
    Rng rng(seed);
    Image img(height, width, 1, 0.0, std::move(id));

    // Soft tissue: smooth vertical/horizontal gradient plus a broad blob.
    const double g0 = rng.uniform(0.12, 0.25);
    const double gy = rng.uniform(-0.08, 0.08);
    const double gx = rng.uniform(-0.08, 0.08);
    const double bx = rng.uniform(0.2, 0.8) * width, by = rng.uniform(0.2, 0.8) * height;
    const double bs = rng.uniform(0.25, 0.5) * std::min(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double u = static_cast<double>(y) / height, v = static_cast<double>(x) / width;
            const double d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (bs * bs);
            img.at(y, x) = g0 + gy * u + gx * v + 0.12 * std::exp(-d2);
        }

    // Bone shafts: rotated capsules with bright cortex and striated medulla.
    const int bones = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < bones; ++b) {
        const double cx = rng.uniform(0.2, 0.8) * width, cy = rng.uniform(0.2, 0.8) * height;
        const double ang = rng.uniform(0.0, 3.14159265358979323846);
        const double half_len = rng.uniform(0.3, 0.6) * std::max(height, width);
        const double radius = rng.uniform(0.06, 0.14) * std::min(height, width);
        const double cortex = std::max(1.0, radius * rng.uniform(0.2, 0.35));
        const double freq = rng.uniform(0.6, 1.4);
        const double phase = rng.uniform(0.0, 6.283185307179586);
        const double ca = std::cos(ang), sa = std::sin(ang);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double along = dx * ca + dy * sa;
                const double across = -dx * sa + dy * ca;
                const double t = std::clamp(along, -half_len, half_len);
                const double dist = std::hypot(along - t, across);
                if (dist > radius) continue;
                double v;
                if (dist > radius - cortex)
                    v = 0.85;
                else
                    v = 0.5 + 0.08 * std::sin(freq * along + phase) * std::cos(0.7 * freq * across);
                img.at(y, x) = std::max(img.at(y, x), v);
            }
    }

    // Rectangular lead marker, like the letters burnt into radiographs.
    const int mh = std::max(2, height / 10), mw = std::max(2, width / 7);
    const int my = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, height - mh))));
    const int mx = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, width - mw))));
    for (int y = my; y < std::min(height, my + mh); ++y)
        for (int x = mx; x < std::min(width, mx + mw); ++x)
            if ((x - mx) % 6 < 4) img.at(y, x) = 0.95;

    // Detector unsharpness: separable Gaussian, sigma 1 px, mirrored edges.
    constexpr double taps[5] = {0.05448868454964294, 0.24420134200323332, 0.4026199468942474,
                                0.24420134200323332, 0.05448868454964294};
    Image tmp = img;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += taps[k + 2] * img.at(y, reflect_index(x + k, width));
            tmp.at(y, x) = s;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += taps[k + 2] * tmp.at(reflect_index(y + k, height), x);
            img.at(y, x) = std::clamp(s, 0.0, 1.0);
        }
    return img;
}

} // namespace o2sr
