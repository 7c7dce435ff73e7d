// Brute-force reference implementations used only by tests. These stay
// independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "srnet/field.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"

namespace oracles {

inline srnet::Image random_image(int w, int h, std::mt19937_64& rng) {
    srnet::Image img = srnet::make_image(w, h);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& v : img.data) v = dist(rng);
    return img;
}

inline srnet::DisplacementField random_field(int w, int h, double amp, std::mt19937_64& rng) {
    srnet::DisplacementField f = srnet::make_field(w, h);
    std::uniform_real_distribution<double> dist(-amp, amp);
    for (auto& v : f.u) v = dist(rng);
    return f;
}

inline srnet::SoftLabelMap random_soft_map(int w, int h, int k, std::mt19937_64& rng) {
    srnet::SoftLabelMap m = srnet::make_soft_label_map(w, h, k);
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int c = 0; c < k; ++c) {
                const double v = dist(rng);
                m.at(x, y, c) = v;
                sum += v;
            }
            for (int c = 0; c < k; ++c) m.at(x, y, c) /= sum;
        }
    return m;
}

/// Plain per-pixel bilinear interpolation looping over the four neighbors,
/// with coordinates clamped to the image rectangle.
inline double bilinear_sample(const srnet::Image& img, double sx, double sy) {
    const double cx = std::clamp(sx, 0.0, double(img.width - 1));
    const double cy = std::clamp(sy, 0.0, double(img.height - 1));
    int x0 = int(std::floor(cx));
    int y0 = int(std::floor(cy));
    x0 = std::min(x0, std::max(img.width - 2, 0));
    y0 = std::min(y0, std::max(img.height - 2, 0));
    const double fx = cx - x0;
    const double fy = cy - y0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int xs = std::min(x0 + dx, img.width - 1);
            const int ys = std::min(y0 + dy, img.height - 1);
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            acc += w * img.at(xs, ys);
        }
    return acc;
}

inline srnet::Image warp_by_loop(const srnet::Image& img, const srnet::DisplacementField& f) {
    srnet::Image out = srnet::make_image(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = bilinear_sample(img, x + f.ux(x, y), y + f.uy(x, y));
    return out;
}

inline double mse_by_loop(const srnet::Image& a, const srnet::Image& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / double(a.data.size());
}

/// LCC by direct window loops: 1 - mean over fully-interior window centers
/// of the squared zero-mean normalized correlation.
inline double lcc_by_loop(const srnet::Image& a, const srnet::Image& b, int window) {
    const int r = window / 2;
    double acc = 0.0;
    std::int64_t count = 0;
    for (int cy = r; cy < a.height - r; ++cy)
        for (int cx = r; cx < a.width - r; ++cx) {
            double sa = 0, sb = 0;
            const int n = window * window;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    sa += a.at(cx + dx, cy + dy);
                    sb += b.at(cx + dx, cy + dy);
                }
            const double ma = sa / n, mb = sb / n;
            double cov = 0, va = 0, vb = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double da = a.at(cx + dx, cy + dy) - ma;
                    const double db = b.at(cx + dx, cy + dy) - mb;
                    cov += da * db;
                    va += da * da;
                    vb += db * db;
                }
            double cc2 = 0.0;
            if (va / n > 1e-10 && vb / n > 1e-10) cc2 = (cov * cov) / (va * vb);
            acc += cc2;
            ++count;
        }
    return 1.0 - (count ? acc / double(count) : 0.0);
}

inline double smooth_by_loop(const srnet::DisplacementField& f) {
    double acc = 0.0;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            if (x + 1 < f.width) {
                const double dx0 = f.ux(x + 1, y) - f.ux(x, y);
                const double dx1 = f.uy(x + 1, y) - f.uy(x, y);
                acc += dx0 * dx0 + dx1 * dx1;
            }
            if (y + 1 < f.height) {
                const double dy0 = f.ux(x, y + 1) - f.ux(x, y);
                const double dy1 = f.uy(x, y + 1) - f.uy(x, y);
                acc += dy0 * dy0 + dy1 * dy1;
            }
        }
    return acc;
}

/// Central finite differences of a scalar function of the field.
inline srnet::DisplacementField fd_gradient(
    const srnet::DisplacementField& field,
    const std::function<double(const srnet::DisplacementField&)>& f, double step = 1e-4) {
    srnet::DisplacementField g = srnet::make_field(field.width, field.height);
    srnet::DisplacementField probe = field;
    for (std::size_t i = 0; i < field.u.size(); ++i) {
        const double saved = probe.u[i];
        probe.u[i] = saved + step;
        const double hi = f(probe);
        probe.u[i] = saved - step;
        const double lo = f(probe);
        probe.u[i] = saved;
        g.u[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

/// True when the sample coordinate at this pixel sits within `margin` of an
/// interpolation cell boundary (integer grid line or domain border kink),
/// where the piecewise-bilinear derivative is one-sided.
inline bool near_cell_boundary(const srnet::DisplacementField& f, int x, int y, double margin) {
    const double sx = x + f.ux(x, y);
    const double sy = y + f.uy(x, y);
    const auto near_int = [margin](double v) {
        return std::abs(v - std::round(v)) < margin;
    };
    if (near_int(sx) || near_int(sy)) return true;
    if (std::abs(sx) < margin || std::abs(sx - (f.width - 1)) < margin) return true;
    if (std::abs(sy) < margin || std::abs(sy - (f.height - 1)) < margin) return true;
    return false;
}

/// Reference Adam on a single scalar parameter.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    long t = 0;

    double step(double param, double grad, double lr, double b1, double b2, double eps) {
        ++t;
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad * grad;
        const double mhat = m / (1.0 - std::pow(b1, double(t)));
        const double vhat = v / (1.0 - std::pow(b2, double(t)));
        return param - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

/// O(|A| * |B|) symmetric boundary-distance percentile. Boundary pixels are
/// class members with a missing or out-of-class 4-neighbor.
inline double hd95_by_loop(const srnet::LabelMap& a, const srnet::LabelMap& b, int class_id) {
    const auto boundary = [class_id](const srnet::LabelMap& m) {
        std::vector<std::pair<int, int>> pts;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                if (m.at(x, y) != class_id) continue;
                bool edge = x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1;
                if (!edge)
                    edge = m.at(x - 1, y) != class_id || m.at(x + 1, y) != class_id ||
                           m.at(x, y - 1) != class_id || m.at(x, y + 1) != class_id;
                if (edge) pts.push_back({x, y});
            }
        return pts;
    };
    const auto pa = boundary(a);
    const auto pb = boundary(b);
    std::vector<double> dists;
    const auto collect = [&dists](const std::vector<std::pair<int, int>>& from,
                                  const std::vector<std::pair<int, int>>& to) {
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dx = p.first - q.first;
                const double dy = p.second - q.second;
                best = std::min(best, dx * dx + dy * dy);
            }
            dists.push_back(std::sqrt(best));
        }
    };
    collect(pa, pb);
    collect(pb, pa);
    std::sort(dists.begin(), dists.end());
    const double pos = 0.95 * double(dists.size() - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const double frac = pos - double(lo);
    if (lo + 1 >= dists.size()) return dists.back();
    return dists[lo] + frac * (dists[lo + 1] - dists[lo]);
}

/// Exact two-sided signed-rank p by enumerating all sign patterns (n <= 20).
inline double wilcoxon_by_enumeration(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] - x[i] != 0.0) d.push_back(y[i] - x[i]);
    const std::size_t n = d.size();
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
    // average ranks of |d|
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return mag[i] < mag[j]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && mag[order[j + 1]] == mag[order[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    double w_obs = 0.0;
    for (std::size_t t = 0; t < n; ++t)
        if (d[t] > 0) w_obs += rank[t];
    std::size_t le = 0, ge = 0;
    const std::uint64_t total = std::uint64_t(1) << n;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        double w = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            if (bits & (std::uint64_t(1) << t)) w += rank[t];
        if (w <= w_obs + 1e-12) ++le;
        if (w >= w_obs - 1e-12) ++ge;
    }
    const double p = 2.0 * std::min(double(le), double(ge)) / double(total);
    return std::min(p, 1.0);
}

} // namespace oracles
