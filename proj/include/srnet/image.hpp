#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "srnet/errors.hpp"

namespace srnet {

/// Single-channel 2D raster, row-major, intensities in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
    double at(int x, int y) const { return data[std::size_t(y) * width + x]; }
    double& at(int x, int y) { return data[std::size_t(y) * width + x]; }
};

inline Image make_image(int width, int height, double fill = 0.0) {
    if (width <= 0 || height <= 0)
        throw ImageTooSmall("image dimensions must be positive");
    Image img;
    img.width = width;
    img.height = height;
    img.data.assign(std::size_t(width) * height, fill);
    return img;
}

inline void check_image(const Image& img, const std::string& what = "image") {
    if (img.width <= 0 || img.height <= 0 ||
        img.data.size() != std::size_t(img.width) * img.height)
        throw DimensionMismatch(what + ": data length does not match dimensions");
    for (double v : img.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(what + ": intensity outside [0,1]");
}

/// Ordered 2D points; correspondence between two sets is by index.
enum class Frame { reference, floating };

struct Landmark {
    double x = 0.0;
    double y = 0.0;
};

struct LandmarkSet {
    std::vector<Landmark> points;
    Frame frame = Frame::reference;

    std::size_t size() const { return points.size(); }
};

/// Half-resolution image: each output pixel is the mean of its 2x2 source
/// block; a trailing odd row/column is dropped.
inline Image downsample_half(const Image& img) {
    if (img.width < 2 || img.height < 2)
        throw ImageTooSmall("downsample_half: need at least 2x2");
    Image out = make_image(img.width / 2, img.height / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const double a = img.at(2 * x, 2 * y);
            const double b = img.at(2 * x + 1, 2 * y);
            const double c = img.at(2 * x, 2 * y + 1);
            const double d = img.at(2 * x + 1, 2 * y + 1);
            out.at(x, y) = (a + b + c + d) * 0.25;
        }
    }
    return out;
}

/// Bilinear resize with pixel-center alignment and border clamping.
inline Image resize_bilinear(const Image& img, int width, int height) {
    if (width <= 0 || height <= 0)
        throw ImageTooSmall("resize_bilinear: target dimensions must be positive");
    Image out = make_image(width, height);
    const double sx_scale = double(img.width) / width;
    const double sy_scale = double(img.height) / height;
    for (int y = 0; y < height; ++y) {
        const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, double(img.height - 1));
        int y0 = std::min(int(std::floor(sy)), std::max(img.height - 2, 0));
        const double fy = sy - y0;
        const int y1 = std::min(y0 + 1, img.height - 1);
        for (int x = 0; x < width; ++x) {
            const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, double(img.width - 1));
            int x0 = std::min(int(std::floor(sx)), std::max(img.width - 2, 0));
            const double fx = sx - x0;
            const int x1 = std::min(x0 + 1, img.width - 1);
            out.at(x, y) = (1.0 - fx) * (1.0 - fy) * img.at(x0, y0) +
                           fx * (1.0 - fy) * img.at(x1, y0) +
                           (1.0 - fx) * fy * img.at(x0, y1) +
                           fx * fy * img.at(x1, y1);
        }
    }
    return out;
}

inline Image abs_difference(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("abs_difference: image dimensions differ");
    Image out = make_image(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = std::abs(a.data[i] - b.data[i]);
    return out;
}

/// Alternating tiles from a and b, for visual alignment checks.
inline Image checkerboard(const Image& a, const Image& b, int tile = 16) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("checkerboard: image dimensions differ");
    if (tile < 1) tile = 1;
    Image out = make_image(a.width, a.height);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            out.at(x, y) = (((x / tile) + (y / tile)) % 2 == 0) ? a.at(x, y) : b.at(x, y);
    return out;
}

} // namespace srnet
