#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "srnet/clustering.hpp" // detail::mix_seed
#include "srnet/errors.hpp"
#include "srnet/features.hpp" // gaussian kernel + separable convolution helpers
#include "srnet/field.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"
#include "srnet/warp.hpp"

namespace srnet {

/// Ground-truth pair. The reference is the warped render of the base and the
/// floating image is the base plus noise, so that warping the floating image
/// by true_field reproduces the reference exactly (noise aside): the planted
/// field is itself the registration target, and landmark transfer through it
/// is anatomically consistent with the image content.
struct SynthPair {
    Image reference;
    Image floating;
    DisplacementField true_field;
    LandmarkSet ref_landmarks;
    LandmarkSet flt_landmarks;
    LabelMap ref_regions; // planted structure when built from structured_image
    bool structured = false;
};

/// Gaussian-smoothed white noise, rescaled so the largest displacement
/// magnitude equals `amplitude`.
inline DisplacementField elastic_field(int width, int height, double amplitude, double sigma,
                                       std::uint64_t seed) {
    if (amplitude < 0.0) throw Error("elastic_field: amplitude must be >= 0");
    if (sigma <= 0.0) throw Error("elastic_field: sigma must be > 0");
    DisplacementField field = make_field(width, height);
    if (amplitude == 0.0) return field;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Image nx = make_image(width, height), ny = make_image(width, height);
    for (std::size_t i = 0; i < nx.data.size(); ++i) {
        nx.data[i] = gauss(rng);
        ny.data[i] = gauss(rng);
    }
    const auto kernel = detail::gauss_kernel(sigma);
    const Image sx = detail::separable(nx, kernel, kernel);
    const Image sy = detail::separable(ny, kernel, kernel);

    double max_mag = 0.0;
    for (std::size_t i = 0; i < sx.data.size(); ++i)
        max_mag = std::max(max_mag, std::hypot(sx.data[i], sy.data[i]));
    const double scale = max_mag > 0.0 ? amplitude / max_mag : 0.0;
    for (std::size_t i = 0; i < sx.data.size(); ++i) {
        field.u[2 * i] = sx.data[i] * scale;
        field.u[2 * i + 1] = sy.data[i] * scale;
    }
    return field;
}

inline SynthPair make_pair(const Image& base, const LandmarkSet& landmarks, double amplitude,
                           double sigma, double noise_std, std::uint64_t seed) {
    for (const auto& p : landmarks.points)
        if (p.x < 0.0 || p.x > base.width - 1 || p.y < 0.0 || p.y > base.height - 1)
            throw PointOutOfDomain("make_pair: landmark outside base image");

    SynthPair pair;
    pair.true_field =
        elastic_field(base.width, base.height, amplitude, sigma, detail::mix_seed(seed, 1));
    pair.reference = warp_image(base, pair.true_field);
    pair.floating = base;
    if (noise_std > 0.0) {
        std::mt19937_64 rng(detail::mix_seed(seed, 2));
        std::normal_distribution<double> gauss(0.0, noise_std);
        for (auto& v : pair.floating.data)
            v = std::clamp(v + gauss(rng), 0.0, 1.0);
    }
    pair.ref_landmarks = landmarks;
    pair.ref_landmarks.frame = Frame::reference;
    pair.flt_landmarks = warp_points(pair.ref_landmarks, pair.true_field);
    for (const auto& p : pair.flt_landmarks.points)
        if (p.x < 0.0 || p.x > base.width - 1 || p.y < 0.0 || p.y > base.height - 1)
            throw PointOutOfDomain("make_pair: transferred landmark left the image");
    return pair;
}

/// Multi-octave smoothed noise with a robust contrast stretch: a richly
/// textured base with signal at every scale, for registration ground-truth
/// suites.
inline Image textured_image(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Image acc = make_image(width, height, 0.0);
    double weight = 1.0;
    for (double sigma : {1.0, 2.0, 4.0, 8.0}) {
        Image noise = make_image(width, height);
        for (auto& v : noise.data) v = gauss(rng);
        const auto kernel = detail::gauss_kernel(sigma);
        noise = detail::separable(noise, kernel, kernel);
        double mean = 0.0, var = 0.0;
        for (double v : noise.data) mean += v;
        mean /= double(noise.data.size());
        for (double v : noise.data) var += (v - mean) * (v - mean);
        var /= double(noise.data.size());
        const double scale = weight / std::sqrt(std::max(var, 1e-300));
        for (std::size_t i = 0; i < acc.data.size(); ++i)
            acc.data[i] += (noise.data[i] - mean) * scale;
        weight *= 0.7;
    }
    std::vector<double> sorted = acc.data;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[std::size_t(0.02 * double(sorted.size() - 1))];
    const double hi = sorted[std::size_t(0.98 * double(sorted.size() - 1))];
    const double span = hi > lo ? hi - lo : 1.0;
    for (auto& v : acc.data) v = std::clamp(0.03 + 0.94 * (v - lo) / span, 0.0, 1.0);
    return acc;
}

/// Voronoi partition with per-region base intensities (uniformly spread over
/// [0,1], shuffled) plus mild texture noise.
inline std::pair<Image, LabelMap> structured_image(int width, int height, int n_regions,
                                                   std::uint64_t seed) {
    if (n_regions < 2) throw Error("structured_image: need at least 2 regions");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, width - 1), py(0, height - 1);

    std::vector<std::pair<int, int>> sites;
    const double min_dist = 0.35 * std::sqrt(double(width) * height / double(n_regions));
    while (int(sites.size()) < n_regions) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const int x = px(rng), y = py(rng);
            bool ok = true;
            for (const auto& s : sites)
                if (std::hypot(double(x - s.first), double(y - s.second)) < min_dist) {
                    ok = false;
                    break;
                }
            if (ok) {
                sites.push_back({x, y});
                placed = true;
            }
        }
        if (!placed) sites.push_back({px(rng), py(rng)}); // dense layout, accept anything
    }

    LabelMap regions = make_label_map(width, height, n_regions);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int s = 0; s < n_regions; ++s) {
                const double d = std::hypot(double(x - sites[std::size_t(s)].first),
                                            double(y - sites[std::size_t(s)].second));
                if (d < bd) {
                    bd = d;
                    best = s;
                }
            }
            regions.at(x, y) = best;
        }

    std::vector<double> intensity(static_cast<std::size_t>(n_regions));
    for (int i = 0; i < n_regions; ++i)
        intensity[std::size_t(i)] = double(i) / double(n_regions - 1);
    std::shuffle(intensity.begin(), intensity.end(), rng);

    // spatially correlated texture: smoothed noise rescaled to std 0.02, so
    // the texture survives subpixel resampling instead of decorrelating
    std::normal_distribution<double> noise(0.0, 1.0);
    Image texture = make_image(width, height);
    for (auto& v : texture.data) v = noise(rng);
    const auto kernel = detail::gauss_kernel(1.5);
    texture = detail::separable(texture, kernel, kernel);
    double mean = 0.0, var = 0.0;
    for (double v : texture.data) mean += v;
    mean /= double(texture.data.size());
    for (double v : texture.data) var += (v - mean) * (v - mean);
    var /= double(texture.data.size());
    const double scale = var > 0.0 ? 0.02 / std::sqrt(var) : 0.0;

    Image img = make_image(width, height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = std::clamp(intensity[std::size_t(regions.labels[i])] +
                                     (texture.data[i] - mean) * scale,
                                 0.0, 1.0);
    return {img, regions};
}

struct PlantedClusters {
    std::vector<double> points; // n * dim
    std::vector<int> labels;
    std::vector<double> centers; // k * dim
};

/// k Gaussian blobs with centers at pairwise distance >= separation.
inline PlantedClusters planted_clusters(int n_points, int k, int dim, double separation,
                                        double sigma, std::uint64_t seed) {
    if (k < 1) throw Error("planted_clusters: k must be >= 1");
    if (separation <= 0.0) throw Error("planted_clusters: separation must be > 0");
    if (n_points < k) throw Error("planted_clusters: need at least k points");
    std::mt19937_64 rng(seed);

    PlantedClusters out;
    out.centers.assign(std::size_t(k) * dim, 0.0);
    double box = separation * std::max(2.0, std::ceil(std::pow(double(k), 1.0 / dim)) * 2.0);
    for (int attempt = 0;; ++attempt) {
        std::uniform_real_distribution<double> u(0.0, box);
        for (int c = 0; c < k; ++c)
            for (int d = 0; d < dim; ++d)
                out.centers[std::size_t(c) * dim + d] = u(rng);
        bool ok = true;
        for (int a = 0; a < k && ok; ++a)
            for (int b = a + 1; b < k && ok; ++b) {
                double d2 = 0.0;
                for (int d = 0; d < dim; ++d) {
                    const double diff = out.centers[std::size_t(a) * dim + d] -
                                        out.centers[std::size_t(b) * dim + d];
                    d2 += diff * diff;
                }
                ok = d2 >= separation * separation;
            }
        if (ok) break;
        if (attempt % 50 == 49) box *= 1.5; // widen until placement succeeds
    }

    out.points.assign(std::size_t(n_points) * dim, 0.0);
    out.labels.assign(std::size_t(n_points), 0);
    std::normal_distribution<double> gauss(0.0, sigma);
    int idx = 0;
    for (int c = 0; c < k; ++c) {
        const int count = n_points / k + (c < n_points % k ? 1 : 0);
        for (int i = 0; i < count; ++i, ++idx) {
            out.labels[std::size_t(idx)] = c;
            for (int d = 0; d < dim; ++d)
                out.points[std::size_t(idx) * dim + d] =
                    out.centers[std::size_t(c) * dim + d] + gauss(rng);
        }
    }
    return out;
}

/// Uniform grid of landmarks with a safety margin from the image border.
inline LandmarkSet grid_landmarks(int width, int height, int per_axis, double margin) {
    LandmarkSet set;
    set.frame = Frame::reference;
    for (int j = 0; j < per_axis; ++j)
        for (int i = 0; i < per_axis; ++i) {
            const double x = margin + (width - 1 - 2 * margin) * double(i) / (per_axis - 1);
            const double y = margin + (height - 1 - 2 * margin) * double(j) / (per_axis - 1);
            set.points.push_back({x, y});
        }
    return set;
}

/// structured_image + make_pair, with the planted regions carried along in
/// both frames (floating frame holds the base's regions; the reference
/// frame gets the nearest-neighbor transfer through the true field).
inline SynthPair make_structured_pair(int width, int height, int n_regions, int landmarks_per_axis,
                                      double amplitude, double sigma, double noise_std,
                                      std::uint64_t seed) {
    const auto [base, regions] = structured_image(width, height, n_regions, detail::mix_seed(seed, 10));
    const double margin = std::max(2.0, std::ceil(amplitude) + 2.0);
    const LandmarkSet grid = grid_landmarks(width, height, landmarks_per_axis, margin);
    SynthPair pair = make_pair(base, grid, amplitude, sigma, noise_std, seed);
    pair.ref_regions = warp_labels_nearest(regions, pair.true_field);
    pair.structured = true;
    return pair;
}

} // namespace srnet
