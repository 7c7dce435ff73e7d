#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/image.hpp"

namespace srnet {

/// Hard per-pixel class assignments in [0, k).
struct LabelMap {
    int width = 0;
    int height = 0;
    int k = 0;
    std::vector<int> labels; // row-major

    int at(int x, int y) const { return labels[std::size_t(y) * width + x]; }
    int& at(int x, int y) { return labels[std::size_t(y) * width + x]; }
};

inline LabelMap make_label_map(int width, int height, int k) {
    if (width <= 0 || height <= 0 || k <= 0)
        throw DimensionMismatch("label map dimensions and k must be positive");
    LabelMap m;
    m.width = width;
    m.height = height;
    m.k = k;
    m.labels.assign(std::size_t(width) * height, 0);
    return m;
}

/// Per-pixel class probabilities; k planes, each stored like an Image.
/// Probabilities at every pixel sum to 1.
struct SoftLabelMap {
    int width = 0;
    int height = 0;
    int k = 0;
    std::vector<double> planes; // plane-major: plane * width * height + y * width + x

    std::size_t pixels() const { return std::size_t(width) * height; }
    double at(int x, int y, int c) const {
        return planes[std::size_t(c) * pixels() + std::size_t(y) * width + x];
    }
    double& at(int x, int y, int c) {
        return planes[std::size_t(c) * pixels() + std::size_t(y) * width + x];
    }
};

inline SoftLabelMap make_soft_label_map(int width, int height, int k) {
    if (width <= 0 || height <= 0 || k <= 0)
        throw DimensionMismatch("soft label map dimensions and k must be positive");
    SoftLabelMap m;
    m.width = width;
    m.height = height;
    m.k = k;
    m.planes.assign(std::size_t(width) * height * k, k > 0 ? 1.0 / k : 0.0);
    return m;
}

inline SoftLabelMap one_hot(const LabelMap& hard) {
    SoftLabelMap soft = make_soft_label_map(hard.width, hard.height, hard.k);
    std::fill(soft.planes.begin(), soft.planes.end(), 0.0);
    for (int y = 0; y < hard.height; ++y)
        for (int x = 0; x < hard.width; ++x)
            soft.at(x, y, hard.at(x, y)) = 1.0;
    return soft;
}

inline LabelMap argmax_labels(const SoftLabelMap& soft) {
    LabelMap hard = make_label_map(soft.width, soft.height, soft.k);
    for (int y = 0; y < soft.height; ++y)
        for (int x = 0; x < soft.width; ++x) {
            int best = 0;
            double bv = soft.at(x, y, 0);
            for (int c = 1; c < soft.k; ++c)
                if (soft.at(x, y, c) > bv) { // ties keep the lowest class index
                    bv = soft.at(x, y, c);
                    best = c;
                }
            hard.at(x, y) = best;
        }
    return hard;
}

/// Half-resolution soft map: 2x2 mean per plane (the mean of simplex vectors
/// stays on the simplex), renormalized against rounding drift.
inline SoftLabelMap downsample_half_soft(const SoftLabelMap& m) {
    if (m.width < 2 || m.height < 2)
        throw ImageTooSmall("downsample_half_soft: need at least 2x2");
    SoftLabelMap out = make_soft_label_map(m.width / 2, m.height / 2, m.k);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            double sum = 0.0;
            for (int c = 0; c < m.k; ++c) {
                const double v = 0.25 * (m.at(2 * x, 2 * y, c) + m.at(2 * x + 1, 2 * y, c) +
                                         m.at(2 * x, 2 * y + 1, c) + m.at(2 * x + 1, 2 * y + 1, c));
                out.at(x, y, c) = v;
                sum += v;
            }
            if (sum > 0.0)
                for (int c = 0; c < m.k; ++c)
                    out.at(x, y, c) /= sum;
        }
    return out;
}

/// Labels scaled onto [0,1] for image export ([0,255] after quantization).
inline Image label_map_to_image(const LabelMap& m) {
    Image img = make_image(m.width, m.height);
    const double scale = m.k > 1 ? 1.0 / double(m.k - 1) : 0.0;
    for (std::size_t i = 0; i < m.labels.size(); ++i)
        img.data[i] = m.labels[i] * scale;
    return img;
}

} // namespace srnet
