#include "o2sr/kernels.hpp"

#include <string>

namespace o2sr::kernels {

FeatureMap pixel_shuffle(const FeatureMap& in, int factor)
{
    if (factor < 1) throw ShapeError("shuffle factor must be >= 1");
    const int dd = factor * factor;
    if (in.channels() % dd != 0)
        throw ShapeError("channels " + std::to_string(in.channels()) + " not divisible by " + std::to_string(dd));
    const int c_out = in.channels() / dd;
    FeatureMap out(c_out, in.height() * factor, in.width() * factor);
    for (int c = 0; c < c_out; ++c)
        for (int i = 0; i < factor; ++i)
            for (int j = 0; j < factor; ++j)
                for (int y = 0; y < in.height(); ++y)
                    for (int x = 0; x < in.width(); ++x)
                        out(c, y * factor + i, x * factor + j) = in(c * dd + i * factor + j, y, x);
    return out;
}

FeatureMap pixel_unshuffle(const FeatureMap& in, int factor)
{
    if (factor < 1) throw ShapeError("shuffle factor must be >= 1");
    if (in.height() % factor != 0 || in.width() % factor != 0)
        throw ShapeError("dims " + in.dims_string() + " not divisible by " + std::to_string(factor));
    const int dd = factor * factor;
    FeatureMap out(in.channels() * dd, in.height() / factor, in.width() / factor);
    for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < factor; ++i)
            for (int j = 0; j < factor; ++j)
                for (int y = 0; y < out.height(); ++y)
                    for (int x = 0; x < out.width(); ++x)
                        out(c * dd + i * factor + j, y, x) = in(c, y * factor + i, x * factor + j);
    return out;
}

} // namespace o2sr::kernels
