#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "o2sr/common.hpp"

namespace o2sr {

/// C x H x W activation tensor, channel-planar, row-major within a plane.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int channels, int height, int width, double fill = 0.0)
        : c_(channels), h_(height), w_(width)
    {
        if (channels < 1 || height < 1 || width < 1)
            throw ShapeError("FeatureMap dims must be positive, got " + dims_string());
        data_.assign(static_cast<std::size_t>(c_) * h_ * w_, fill);
    }

    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    std::size_t size() const { return data_.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h_) * w_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
    double operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const
    {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    bool same_shape(const FeatureMap& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    std::string dims_string() const
    {
        return std::to_string(c_) + "x" + std::to_string(h_) + "x" + std::to_string(w_);
    }

    /// Swaps the spatial axes of every channel.
    FeatureMap transposed() const
    {
        FeatureMap t(c_, w_, h_);
        for (int c = 0; c < c_; ++c)
            for (int y = 0; y < h_; ++y)
                for (int x = 0; x < w_; ++x) t(c, x, y) = (*this)(c, y, x);
        return t;
    }

private:
    std::size_t index(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
    }

    int c_ = 0;
    int h_ = 0;
    int w_ = 0;
    std::vector<double> data_;
};

/// Dense n-d parameter tensor (row-major).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape))
    {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d < 1) throw ShapeError("Tensor dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, fill);
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor& o) const = default;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

} // namespace o2sr
