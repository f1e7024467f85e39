#include <gtest/gtest.h>

#include <numbers>

#include "o2sr/gradient_domain.hpp"
#include "oracles.hpp"

using namespace o2sr;

TEST(ImageGradients, ConstantImageIsFlat)
{
    const GradientField g = image_gradients(Image(9, 7, 1, 0.4));
    for (double v : g.magnitude.data()) EXPECT_EQ(v, 0.0);
    const Image heat = magnitude_heatmap(g);
    for (double v : heat.data()) EXPECT_EQ(v, 0.0);
    for (int v : dominant_orientations(g).dominant) EXPECT_EQ(v, -1);
}

TEST(ImageGradients, CentralDifferences)
{
    Image img(5, 6);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) img.at(y, x) = 0.1 * x * x + 0.05 * y;
    const GradientField g = image_gradients(img);
    const double gx = (0.1 * 9 - 0.1 * 1) / 2.0, gy = 0.05;
    EXPECT_NEAR(g.magnitude.at(2, 2), std::hypot(gx, gy), 1e-12);
    // Replicated border: one-sided difference halved.
    EXPECT_NEAR(g.magnitude.at(0, 0), std::hypot(0.1 / 2.0, 0.05 / 2.0), 1e-12);
    for (double a : g.angle.data()) {
        EXPECT_GE(a, 0.0);
        EXPECT_LT(a, std::numbers::pi);
    }
    EXPECT_THROW(image_gradients(Image(4, 4, 3)), ShapeError);
}

TEST(DominantOrientations, VerticalStripesUseHorizontalGradientBin)
{
    Image img(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) img.at(y, x) = (x / 4) % 2;
    const OrientationCells cells = dominant_orientations(image_gradients(img), 8, 8);
    EXPECT_EQ(cells.rows, 4);
    EXPECT_EQ(cells.cols, 4);
    for (int v : cells.dominant) EXPECT_EQ(v, 0);  // angle 0 = gradient along x

    Image horiz(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) horiz.at(y, x) = (y / 4) % 2;
    for (int v : dominant_orientations(image_gradients(horiz), 8, 8).dominant) EXPECT_EQ(v, 4);
}

TEST(DominantOrientations, PartialCellsAndMap)
{
    Image img(10, 13);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 13; ++x) img.at(y, x) = (x / 4) % 2;
    const OrientationCells cells = dominant_orientations(image_gradients(img), 8, 8);
    EXPECT_EQ(cells.rows, 2);
    EXPECT_EQ(cells.cols, 2);
    const Image map = orientation_map(cells, 10, 13, 8);
    EXPECT_EQ(map.height(), 10);
    EXPECT_EQ(map.width(), 13);
    EXPECT_DOUBLE_EQ(map.at(9, 12), (cells.at(1, 1) + 1) / 8.0);
}

TEST(Heatmap, MaximumIsOne)
{
    Rng rng(3);
    const Image heat = magnitude_heatmap(image_gradients(oracle::random_image(rng, 12, 12)));
    double mx = 0.0;
    for (double v : heat.data()) mx = std::max(mx, v);
    EXPECT_DOUBLE_EQ(mx, 1.0);
}
