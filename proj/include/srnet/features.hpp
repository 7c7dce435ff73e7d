#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/image.hpp"

namespace srnet {

/// Fixed analytic filter bank applied at several max-pooled scales; coarse
/// responses are upsampled back to full resolution, concatenated, and
/// standardized per channel.
struct FeatureConfig {
    double sigma = 1.0;  // blur / derivative / first curvature scale
    double sigma2 = 2.0; // second curvature scale
    int scales = 3;
    bool standardize = true;
};

constexpr int kChannelsPerScale = 6;

inline int feature_depth(const FeatureConfig& cfg) { return kChannelsPerScale * cfg.scales; }

/// Per-pixel feature vectors, pixel-major: data[p * depth + c].
struct FeatureStack {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::vector<double> data;

    std::size_t pixels() const { return std::size_t(width) * height; }
    const double* pixel(std::size_t p) const { return data.data() + p * depth; }
    double at(int x, int y, int c) const {
        return data[(std::size_t(y) * width + x) * depth + c];
    }
};

namespace detail {

/// half-sample symmetric reflection: ..., 2, 1, 0 | 0, 1, 2, ..., n-1 | n-1, n-2, ...
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline std::vector<double> gauss_kernel(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[std::size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[std::size_t(i + radius)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// zero-sum antisymmetric kernel normalized to respond 1 on a unit ramp
inline std::vector<double> gauss_deriv_kernel(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[std::size_t(i + radius)] = i * std::exp(-0.5 * i * i / (sigma * sigma));
        norm += i * k[std::size_t(i + radius)];
    }
    for (auto& v : k) v /= norm;
    return k;
}

/// zero-sum symmetric kernel normalized to respond 2 on x^2 (a second
/// difference at Gaussian scale)
inline std::vector<double> gauss_second_kernel(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double mean = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[std::size_t(i + radius)] = (i * i - sigma * sigma) * std::exp(-0.5 * i * i / (sigma * sigma));
        mean += k[std::size_t(i + radius)];
    }
    mean /= double(k.size());
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[std::size_t(i + radius)] -= mean;
        norm += k[std::size_t(i + radius)] * i * i;
    }
    for (auto& v : k) v *= 2.0 / norm;
    return k;
}

inline Image conv_rows(const Image& img, const std::vector<double>& kernel) {
    const int radius = int(kernel.size()) / 2;
    Image out = make_image(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[std::size_t(i + radius)] * img.at(reflect_index(x + i, img.width), y);
            out.at(x, y) = acc;
        }
    return out;
}

inline Image conv_cols(const Image& img, const std::vector<double>& kernel) {
    const int radius = int(kernel.size()) / 2;
    Image out = make_image(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[std::size_t(i + radius)] * img.at(x, reflect_index(y + i, img.height));
            out.at(x, y) = acc;
        }
    return out;
}

inline Image separable(const Image& img, const std::vector<double>& kx, const std::vector<double>& ky) {
    return conv_cols(conv_rows(img, kx), ky);
}

inline Image add_images(const Image& a, const Image& b) {
    Image out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Image max_pool_half(const Image& img) {
    if (img.width < 2 || img.height < 2)
        throw ImageTooSmall("max_pool_half: need at least 2x2");
    Image out = make_image(img.width / 2, img.height / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = std::max(std::max(img.at(2 * x, 2 * y), img.at(2 * x + 1, 2 * y)),
                                    std::max(img.at(2 * x, 2 * y + 1), img.at(2 * x + 1, 2 * y + 1)));
    return out;
}

/// six responses of the bank at one scale
inline std::vector<Image> bank_responses(const Image& img, const FeatureConfig& cfg) {
    const auto g1 = gauss_kernel(cfg.sigma);
    const auto d1 = gauss_deriv_kernel(cfg.sigma);
    const auto s1 = gauss_second_kernel(cfg.sigma);
    const auto g2 = gauss_kernel(cfg.sigma2);
    const auto s2 = gauss_second_kernel(cfg.sigma2);
    std::vector<Image> out;
    out.push_back(img);
    out.push_back(separable(img, g1, g1));
    out.push_back(separable(img, d1, g1));
    out.push_back(separable(img, g1, d1));
    out.push_back(add_images(separable(img, s1, g1), separable(img, g1, s1)));
    out.push_back(add_images(separable(img, s2, g2), separable(img, g2, s2)));
    return out;
}

} // namespace detail

inline FeatureStack extract(const Image& img, const FeatureConfig& cfg) {
    if (cfg.scales < 1) throw Error("extract: scales must be >= 1");
    const int min_dim = 1 << cfg.scales;
    if (img.width < min_dim || img.height < min_dim)
        throw ImageTooSmall("extract: image too small for " + std::to_string(cfg.scales) + " scales");

    FeatureStack fs;
    fs.width = img.width;
    fs.height = img.height;
    fs.depth = feature_depth(cfg);
    fs.data.assign(fs.pixels() * fs.depth, 0.0);

    Image level = img;
    for (int s = 0; s < cfg.scales; ++s) {
        if (s > 0) level = detail::max_pool_half(level);
        const auto responses = detail::bank_responses(level, cfg);
        for (int c = 0; c < kChannelsPerScale; ++c) {
            const Image full =
                (s == 0) ? responses[std::size_t(c)]
                         : resize_bilinear(responses[std::size_t(c)], img.width, img.height);
            const int channel = s * kChannelsPerScale + c;
            for (std::size_t p = 0; p < fs.pixels(); ++p)
                fs.data[p * fs.depth + channel] = full.data[p];
        }
    }

    if (cfg.standardize) {
        const double n = double(fs.pixels());
        for (int c = 0; c < fs.depth; ++c) {
            double mean = 0.0;
            for (std::size_t p = 0; p < fs.pixels(); ++p) mean += fs.data[p * fs.depth + c];
            mean /= n;
            double var = 0.0;
            for (std::size_t p = 0; p < fs.pixels(); ++p) {
                const double d = fs.data[p * fs.depth + c] - mean;
                var += d * d;
            }
            var /= n;
            if (var <= 1e-14) {
                // constant channel: no clustering information
                for (std::size_t p = 0; p < fs.pixels(); ++p) fs.data[p * fs.depth + c] = 0.0;
            } else {
                const double inv = 1.0 / std::sqrt(var);
                for (std::size_t p = 0; p < fs.pixels(); ++p)
                    fs.data[p * fs.depth + c] = (fs.data[p * fs.depth + c] - mean) * inv;
            }
        }
    }
    return fs;
}

inline double feature_distance(const FeatureStack& a, std::size_t p, const FeatureStack& b,
                               std::size_t q) {
    if (a.depth != b.depth)
        throw DepthMismatch("feature_distance: feature depths differ");
    const double* va = a.pixel(p);
    const double* vb = b.pixel(q);
    double acc = 0.0;
    for (int c = 0; c < a.depth; ++c) {
        const double d = va[c] - vb[c];
        acc += d * d;
    }
    return acc;
}

} // namespace srnet
