#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "o2sr/image.hpp"
#include "o2sr/metrics.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace o2sr;

namespace {

std::vector<double> values(const Image& img) { return {img.data().begin(), img.data().end()}; }

fs::path fresh_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("o2sr_image_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Bicubic weight with a = -0.5.
double cubic(double t)
{
    t = std::abs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

// Direct 2-D bicubic: 4x4 neighbourhood around each output center mapped
// back to input coordinates, mirror boundary.
Image bicubic_reference(const Image& img, double factor)
{
    const int oh = static_cast<int>(img.height() * factor), ow = static_cast<int>(img.width() * factor);
    Image out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const double sy = (y + 0.5) / factor - 0.5, sx = (x + 0.5) / factor - 0.5;
            const int by = static_cast<int>(std::floor(sy)), bx = static_cast<int>(std::floor(sx));
            double s = 0.0;
            for (int i = by - 1; i <= by + 2; ++i)
                for (int j = bx - 1; j <= bx + 2; ++j)
                    s += cubic(sy - i) * cubic(sx - j) * img.at(oracle::mirror(i, img.height()), oracle::mirror(j, img.width()));
            out.at(y, x) = s;
        }
    return out;
}

} // namespace

TEST(ImageIo, EightBitEndpoints)
{
    const fs::path dir = fresh_dir("endpoints");
    save_image(Image(3, 4, 1, 1.0), dir / "white.png");
    save_image(Image(3, 4, 1, 0.0), dir / "black.png");
    for (double v : values(load_image(dir / "white.png"))) EXPECT_EQ(v, 1.0);
    for (double v : values(load_image(dir / "black.png"))) EXPECT_EQ(v, 0.0);
}

TEST(ImageIo, SixteenBitNormalization)
{
    const fs::path dir = fresh_dir("sixteen");
    save_image(Image(1, 1, 1, 32768.0 / 65535.0), dir / "mid.png", 16);
    EXPECT_DOUBLE_EQ(load_image(dir / "mid.png").at(0, 0), 32768.0 / 65535.0);
}

TEST(ImageIo, QuantizationBounds)
{
    const fs::path dir = fresh_dir("quant");
    save_image(Image(5, 5, 1, 0.5), dir / "half.png");
    for (double v : values(load_image(dir / "half.png"))) EXPECT_LE(std::abs(v - 0.5), 1.0 / 510.0);

    Rng rng(3);
    const Image r = oracle::random_image(rng, 16, 16);
    save_image(r, dir / "r16.png", 16);
    EXPECT_LE(oracle::max_abs_diff(load_image(dir / "r16.png"), r), 1.0 / 131070.0 + 1e-15);
}

TEST(ImageIo, RgbRoundTrip)
{
    const fs::path dir = fresh_dir("rgb");
    Image img(2, 2, 3, 0.0);
    img.at(0, 0, 0) = 1.0;
    img.at(1, 1, 2) = 1.0;
    save_image(img, dir / "rgb.png");
    const Image back = load_image(dir / "rgb.png");
    ASSERT_EQ(back.channels(), 3);
    EXPECT_EQ(oracle::max_abs_diff(back, img), 0.0);
}

TEST(ImageIo, Errors)
{
    const fs::path dir = fresh_dir("errors");
    EXPECT_THROW(load_image(dir / "missing.png"), IoError);
    std::ofstream(dir / "junk.png") << "not a png";
    EXPECT_THROW(load_image(dir / "junk.png"), Error);
    EXPECT_THROW(save_image(Image(2, 2), dir / "no" / "such" / "dir.png"), IoError);
    EXPECT_THROW(save_image(Image(2, 2), dir / "depth.png", 12), Error);
}

TEST(Luminance, Weights)
{
    Image rgb(1, 1, 3, 0.0);
    rgb.at(0, 0, 0) = 1.0;
    EXPECT_NEAR(to_luminance(rgb).at(0, 0), 0.299, 1e-15);
    Image flat(2, 3, 3, 0.37);
    for (double v : values(to_luminance(flat))) EXPECT_NEAR(v, 0.37, 1e-15);
    Rng rng(1);
    const Image g = oracle::random_image(rng, 4, 4);
    EXPECT_EQ(oracle::max_abs_diff(to_luminance(g), g), 0.0);
    EXPECT_THROW(to_luminance(Image(2, 2, 2)), ShapeError);
}

TEST(Bicubic, ConstantAndIdentity)
{
    const Image c(9, 7, 1, 0.42);
    for (Rational f : {Rational{2, 1}, Rational{1, 2}, Rational{3, 2}, Rational{1, 3}})
        for (double v : values(bicubic_resample(c, f))) EXPECT_NEAR(v, 0.42, 1e-12);
    Rng rng(5);
    const Image r = oracle::random_image(rng, 6, 5);
    EXPECT_EQ(oracle::max_abs_diff(bicubic_resample(r, {1, 1}), r), 0.0);
    EXPECT_THROW(bicubic_resample(Image(2, 2), {1, 4}), ShapeError);
}

TEST(Bicubic, MatchesReference)
{
    Rng rng(8);
    const Image r = oracle::random_image(rng, 8, 12);
    for (double f : {2.0, 4.0, 0.5, 0.25}) {
        const Rational q = f >= 1 ? Rational{static_cast<long>(f), 1} : Rational{1, static_cast<long>(1 / f)};
        EXPECT_LT(oracle::max_abs_diff(bicubic_resample(r, q), bicubic_reference(r, f)), 1e-12) << f;
    }
}

TEST(Bicubic, RampRoundTrip)
{
    Image ramp(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) ramp.at(y, x) = (x + y) / 14.0;
    const Image back = bicubic_resample(bicubic_resample(ramp, {1, 2}), {2, 1});
    const double p = psnr(back, ramp);
    EXPECT_TRUE(std::isfinite(p));
    EXPECT_GT(p, 20.0);
}

TEST(Crop, BorderAndWindow)
{
    Image img(6, 5);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 5; ++x) img.at(y, x) = y * 10 + x;
    const Image c = crop_border(img, 1);
    ASSERT_EQ(c.height(), 4);
    ASSERT_EQ(c.width(), 3);
    EXPECT_EQ(c.at(0, 0), 11);
    EXPECT_EQ(oracle::max_abs_diff(crop_border(img, 0), img), 0.0);
    EXPECT_THROW(crop_border(img, 3), ShapeError);
    EXPECT_EQ(crop(img, 2, 1, 2, 2).at(1, 1), 32);
}

TEST(PairedDataset, OrderingAndErrors)
{
    const fs::path root = fresh_dir("pairs");
    fs::create_directories(root / "hr");
    fs::create_directories(root / "lr_x4");
    for (const char* s : {"b", "a"}) {
        save_image(Image(16, 16), root / "hr" / (std::string(s) + ".png"));
        save_image(Image(4, 4), root / "lr_x4" / (std::string(s) + ".png"));
    }
    const PairedDataset ds = open_paired_root(root, 4);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.pairs[0].hr.id, "a");
    EXPECT_EQ(ds.pairs[1].hr.id, "b");

    fs::remove(root / "hr" / "b.png");
    try {
        open_paired_root(root, 4);
        FAIL() << "expected a pairing error";
    } catch (const PairingError& e) {
        EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
    }

    const fs::path bad = fresh_dir("pairs_dims");
    fs::create_directories(bad / "hr");
    fs::create_directories(bad / "lr_x4");
    save_image(Image(96, 96), bad / "hr" / "a.png");
    save_image(Image(25, 25), bad / "lr_x4" / "a.png");
    EXPECT_THROW(open_paired_root(bad, 4), ContractError);
}

TEST(Synthesis, DeterministicAndInRange)
{
    const Image a = synthesize_radiograph(40, 50, 9), b = synthesize_radiograph(40, 50, 9);
    EXPECT_EQ(oracle::max_abs_diff(a, b), 0.0);
    EXPECT_TRUE(a.in_range());
    EXPECT_GT(oracle::max_abs_diff(a, synthesize_radiograph(40, 50, 10)), 0.0);
}
