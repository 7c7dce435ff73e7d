#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"

namespace srnet {

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / double(v.size());
}

} // namespace detail

// ---------------------------------------------------------------------------
// target registration error
// ---------------------------------------------------------------------------

struct RtreResult {
    std::vector<double> tre;
    std::vector<double> rtre;
    double mean_tre = 0.0;
    double median_tre = 0.0;
    double mean_rtre = 0.0;
    double median_rtre = 0.0;
};

/// Per-landmark Euclidean error, normalized by the image diagonal:
/// rTRE = TRE / sqrt(w^2 + h^2).
inline RtreResult rtre(const LandmarkSet& warped, const LandmarkSet& target, double width,
                       double height) {
    if (warped.size() != target.size())
        throw LengthMismatch("rtre: landmark counts differ");
    if (width <= 0.0 || height <= 0.0) throw Error("rtre: image dimensions must be positive");
    const double diag = std::sqrt(width * width + height * height);
    RtreResult out;
    out.tre.reserve(warped.size());
    out.rtre.reserve(warped.size());
    for (std::size_t i = 0; i < warped.size(); ++i) {
        const double t = std::hypot(warped.points[i].x - target.points[i].x,
                                    warped.points[i].y - target.points[i].y);
        out.tre.push_back(t);
        out.rtre.push_back(t / diag);
    }
    out.mean_tre = detail::mean_of(out.tre);
    out.median_tre = detail::median_of(out.tre);
    out.mean_rtre = out.mean_tre / diag;
    out.median_rtre = out.median_tre / diag;
    return out;
}

// ---------------------------------------------------------------------------
// overlap metrics
// ---------------------------------------------------------------------------

/// Dice overlap for one class; both masks empty counts as perfect agreement.
inline double dice(const LabelMap& a, const LabelMap& b, int class_id) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("dice: mask dimensions differ");
    std::int64_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const bool ia = a.labels[i] == class_id;
        const bool ib = b.labels[i] == class_id;
        na += ia;
        nb += ib;
        ni += ia && ib;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(ni) / double(na + nb);
}

namespace detail {

/// Boundary pixels: class members with a missing or out-of-class 4-neighbor.
inline std::vector<std::pair<int, int>> boundary_pixels(const LabelMap& m, int class_id) {
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
}

/// 1D squared distance transform (Felzenszwalb-Huttenlocher lower envelope).
inline void dt_1d(const std::vector<double>& f, std::vector<double>& d) {
    const int n = int(f.size());
    d.assign(std::size_t(n), 0.0);
    std::vector<int> v(std::size_t(n), 0);
    std::vector<double> z(std::size_t(n) + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[std::size_t(q)] + q * q) - (f[std::size_t(v[std::size_t(k)])] +
                                                   v[std::size_t(k)] * v[std::size_t(k)])) /
                   (2.0 * q - 2.0 * v[std::size_t(k)]);
        while (s <= z[std::size_t(k)]) {
            --k;
            s = ((f[std::size_t(q)] + q * q) - (f[std::size_t(v[std::size_t(k)])] +
                                                v[std::size_t(k)] * v[std::size_t(k)])) /
                (2.0 * q - 2.0 * v[std::size_t(k)]);
        }
        ++k;
        v[std::size_t(k)] = q;
        z[std::size_t(k)] = s;
        z[std::size_t(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[std::size_t(k) + 1] < q) ++k;
        const int vk = v[std::size_t(k)];
        d[std::size_t(q)] = double(q - vk) * (q - vk) + f[std::size_t(vk)];
    }
}

/// Exact squared Euclidean distance to the given seed pixels, whole grid.
inline std::vector<double> squared_edt(int width, int height,
                                       const std::vector<std::pair<int, int>>& seeds) {
    const double inf = 1e18;
    std::vector<double> grid(std::size_t(width) * height, inf);
    for (const auto& s : seeds)
        grid[std::size_t(s.second) * width + s.first] = 0.0;
    std::vector<double> col(static_cast<std::size_t>(height)), cold(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) col[std::size_t(y)] = grid[std::size_t(y) * width + x];
        dt_1d(col, cold);
        for (int y = 0; y < height; ++y) grid[std::size_t(y) * width + x] = cold[std::size_t(y)];
    }
    std::vector<double> row(static_cast<std::size_t>(width)), rowd(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) row[std::size_t(x)] = grid[std::size_t(y) * width + x];
        dt_1d(row, rowd);
        for (int x = 0; x < width; ++x) grid[std::size_t(y) * width + x] = rowd[std::size_t(x)];
    }
    return grid;
}

} // namespace detail

/// 95th percentile (linear interpolation between order statistics) of the
/// pooled nearest boundary-to-boundary distances, taken symmetrically.
inline double hd95(const LabelMap& a, const LabelMap& b, int class_id) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("hd95: mask dimensions differ");
    const auto pa = detail::boundary_pixels(a, class_id);
    const auto pb = detail::boundary_pixels(b, class_id);
    if (pa.empty() || pb.empty())
        throw EmptyMask("hd95: a mask has no pixels of the requested class");

    const auto to_b = detail::squared_edt(a.width, a.height, pb);
    const auto to_a = detail::squared_edt(a.width, a.height, pa);
    std::vector<double> dists;
    dists.reserve(pa.size() + pb.size());
    for (const auto& p : pa)
        dists.push_back(std::sqrt(to_b[std::size_t(p.second) * a.width + p.first]));
    for (const auto& p : pb)
        dists.push_back(std::sqrt(to_a[std::size_t(p.second) * a.width + p.first]));
    std::sort(dists.begin(), dists.end());

    const double pos = 0.95 * double(dists.size() - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const double frac = pos - double(lo);
    if (lo + 1 >= dists.size()) return dists.back();
    return dists[lo] + frac * (dists[lo + 1] - dists[lo]);
}

// ---------------------------------------------------------------------------
// paired Wilcoxon signed-rank test (two-sided)
// ---------------------------------------------------------------------------

/// Exact null distribution for n <= 25 (zero differences dropped, tied
/// magnitudes receive average ranks); normal approximation with tie
/// correction above.
inline double paired_wilcoxon(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("paired_wilcoxon: sample sizes differ");
    if (x.size() < 6) throw Error("paired_wilcoxon: need at least 6 pairs");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] != x[i]) d.push_back(y[i] - x[i]);
    if (d.empty()) throw DegenerateSample("paired_wilcoxon: all differences are zero");

    const int m = int(d.size());
    std::vector<double> mag(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) mag[std::size_t(i)] = std::abs(d[std::size_t(i)]);
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[std::size_t(i)] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return mag[std::size_t(i)] < mag[std::size_t(j)];
    });
    std::vector<double> rank(static_cast<std::size_t>(m));
    std::vector<int> tie_sizes;
    {
        int i = 0;
        while (i < m) {
            int j = i;
            while (j + 1 < m && mag[std::size_t(order[std::size_t(j + 1)])] ==
                                    mag[std::size_t(order[std::size_t(i)])])
                ++j;
            const double avg = 0.5 * double(i + j) + 1.0;
            for (int t = i; t <= j; ++t) rank[std::size_t(order[std::size_t(t)])] = avg;
            tie_sizes.push_back(j - i + 1);
            i = j + 1;
        }
    }
    double w_plus = 0.0;
    for (int i = 0; i < m; ++i)
        if (d[std::size_t(i)] > 0.0) w_plus += rank[std::size_t(i)];

    if (m <= 25) {
        // doubled ranks are integers, so the null distribution is a polynomial
        std::vector<long> r2(static_cast<std::size_t>(m));
        long smax = 0;
        for (int i = 0; i < m; ++i) {
            r2[std::size_t(i)] = std::lround(2.0 * rank[std::size_t(i)]);
            smax += r2[std::size_t(i)];
        }
        std::vector<double> count(std::size_t(smax) + 1, 0.0);
        count[0] = 1.0;
        for (int i = 0; i < m; ++i)
            for (long s = smax; s >= r2[std::size_t(i)]; --s)
                count[std::size_t(s)] += count[std::size_t(s - r2[std::size_t(i)])];
        const long w2 = std::lround(2.0 * w_plus);
        double le = 0.0, ge = 0.0, total = 0.0;
        for (long s = 0; s <= smax; ++s) {
            total += count[std::size_t(s)];
            if (s <= w2) le += count[std::size_t(s)];
            if (s >= w2) ge += count[std::size_t(s)];
        }
        return std::min(1.0, 2.0 * std::min(le, ge) / total);
    }

    const double n = double(m);
    double tie_term = 0.0;
    for (int t : tie_sizes) tie_term += double(t) * t * t - t;
    const double mu = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) throw DegenerateSample("paired_wilcoxon: zero variance");
    const double z = (w_plus - mu) / std::sqrt(var);
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// aggregate report
// ---------------------------------------------------------------------------

struct MetricRecord {
    std::string pair_id;
    double mean_tre = 0.0;
    double median_tre = 0.0;
    double mean_rtre = 0.0;
    double median_rtre = 0.0;
    std::vector<double> dice_per_class;
    std::vector<double> hd95_per_class;
};

struct MetricReport {
    std::vector<MetricRecord> records;
    double aggregate_median_rtre = 0.0; // median over pairs of per-pair medians
    double aggregate_mean_rtre = 0.0;

    void finalize() {
        std::vector<double> med, mean;
        for (const auto& r : records) {
            med.push_back(r.median_rtre);
            mean.push_back(r.mean_rtre);
        }
        aggregate_median_rtre = detail::median_of(med);
        aggregate_mean_rtre = detail::mean_of(mean);
    }
};

inline std::string metric_report_csv(const MetricReport& rep) {
    std::string out = "pair,mean_tre,median_tre,mean_rtre,median_rtre,dice,hd95\n";
    char buf[360];
    for (const auto& r : rep.records) {
        std::string dice_s, hd_s;
        char num[40];
        for (std::size_t c = 0; c < r.dice_per_class.size(); ++c) {
            std::snprintf(num, sizeof(num), "%.6g", r.dice_per_class[c]);
            dice_s += (c ? ";" : "") + std::string(num);
        }
        for (std::size_t c = 0; c < r.hd95_per_class.size(); ++c) {
            std::snprintf(num, sizeof(num), "%.6g", r.hd95_per_class[c]);
            hd_s += (c ? ";" : "") + std::string(num);
        }
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%s,%s\n", r.pair_id.c_str(),
                      r.mean_tre, r.median_tre, r.mean_rtre, r.median_rtre, dice_s.c_str(),
                      hd_s.c_str());
        out += buf;
    }
    return out;
}

} // namespace srnet
