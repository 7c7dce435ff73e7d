#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/features.hpp"
#include "srnet/labels.hpp"
#include "srnet/parallel.hpp"

namespace srnet {

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = seed + 0x9e3779b97f4a7c15ull;
    h ^= a + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

inline double sq_dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int c = 0; c < dim; ++c) {
        const double d = a[c] - b[c];
        acc += d * d;
    }
    return acc;
}

} // namespace detail

struct KMeansResult {
    std::vector<int> assignments;
    std::vector<double> centroids; // k * dim
    double wk = 0.0;               // sum of squared distances to assigned centroids
    int iterations = 0;
    bool converged = false;
    std::vector<double> wk_history; // one entry per Lloyd iteration, non-increasing
};

/// Lloyd's algorithm from a seeded k-means++ initialization, run to an
/// assignment fixpoint or 100 iterations. Ties go to the lowest centroid
/// index; empty clusters re-seed at the point farthest from their stale
/// centroid.
inline KMeansResult kmeans(const std::vector<double>& points, int n, int dim, int k,
                           std::uint64_t seed) {
    if (n <= 0) throw EmptyInput("kmeans: no points");
    if (k < 1 || k > n) throw KTooLarge("kmeans: k must be in [1, point count]");
    if (std::size_t(n) * dim != points.size())
        throw ShapeMismatch("kmeans: point buffer does not match n * dim");

    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.centroids.assign(std::size_t(k) * dim, 0.0);

    // k-means++ seeding; nearest-centroid distances maintained incrementally
    {
        std::uniform_int_distribution<int> pick(0, n - 1);
        const int first = pick(rng);
        std::copy_n(points.data() + std::size_t(first) * dim, dim, res.centroids.data());
        std::vector<double> d2(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            d2[std::size_t(i)] =
                detail::sq_dist(points.data() + std::size_t(i) * dim, res.centroids.data(), dim);
        for (int j = 1; j < k; ++j) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) total += d2[std::size_t(i)];
            int chosen = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double r = u(rng);
                for (int i = 0; i < n; ++i) {
                    r -= d2[std::size_t(i)];
                    chosen = i;
                    if (r <= 0.0) break;
                }
            } else {
                chosen = pick(rng); // all points coincide with chosen centroids
            }
            double* cj = res.centroids.data() + std::size_t(j) * dim;
            std::copy_n(points.data() + std::size_t(chosen) * dim, dim, cj);
            for (int i = 0; i < n; ++i)
                d2[std::size_t(i)] = std::min(
                    d2[std::size_t(i)],
                    detail::sq_dist(points.data() + std::size_t(i) * dim, cj, dim));
        }
    }

    res.assignments.assign(std::size_t(n), -1);
    std::vector<int> prev(std::size_t(n), -1);

    const int chunks = std::min<int>(max_threads(), std::max(1, n));
    std::vector<double> chunk_wk(std::size_t(chunks), 0.0);
    std::vector<double> chunk_sums(std::size_t(chunks) * k * dim);
    std::vector<std::int64_t> chunk_counts(std::size_t(chunks) * k);

    const auto assign_pass = [&](bool accumulate) {
        std::fill(chunk_wk.begin(), chunk_wk.end(), 0.0);
        if (accumulate) {
            std::fill(chunk_sums.begin(), chunk_sums.end(), 0.0);
            std::fill(chunk_counts.begin(), chunk_counts.end(), 0);
        }
        parallel_chunks(n, [&](int chunk, std::int64_t b, std::int64_t e) {
            double local_wk = 0.0;
            double* sums = chunk_sums.data() + std::size_t(chunk) * k * dim;
            std::int64_t* counts = chunk_counts.data() + std::size_t(chunk) * k;
            for (std::int64_t i = b; i < e; ++i) {
                const double* x = points.data() + std::size_t(i) * dim;
                int best = 0;
                double bd = detail::sq_dist(x, res.centroids.data(), dim);
                for (int c = 1; c < k; ++c) {
                    const double d = detail::sq_dist(x, res.centroids.data() + std::size_t(c) * dim, dim);
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
                res.assignments[std::size_t(i)] = best;
                local_wk += bd;
                if (accumulate) {
                    double* s = sums + std::size_t(best) * dim;
                    for (int c = 0; c < dim; ++c) s[c] += x[c];
                    ++counts[std::size_t(best)];
                }
            }
            chunk_wk[std::size_t(chunk)] = local_wk;
        });
        double wk = 0.0;
        for (int c = 0; c < chunks; ++c) wk += chunk_wk[std::size_t(c)];
        return wk;
    };

    for (int iter = 0; iter < 100; ++iter) {
        const double wk = assign_pass(true);
        assert(res.wk_history.empty() || wk <= res.wk_history.back() * (1.0 + 1e-12) + 1e-12);
        res.wk_history.push_back(wk);
        res.wk = wk;
        res.iterations = iter + 1;

        const std::vector<double> old_centroids = res.centroids;
        std::vector<std::int64_t> counts(std::size_t(k), 0);
        std::fill(res.centroids.begin(), res.centroids.end(), 0.0);
        for (int chunk = 0; chunk < chunks; ++chunk) {
            const double* sums = chunk_sums.data() + std::size_t(chunk) * k * dim;
            const std::int64_t* cnt = chunk_counts.data() + std::size_t(chunk) * k;
            for (int c = 0; c < k; ++c) {
                counts[std::size_t(c)] += cnt[std::size_t(c)];
                for (int d = 0; d < dim; ++d)
                    res.centroids[std::size_t(c) * dim + d] += sums[std::size_t(c) * dim + d];
            }
        }
        std::vector<bool> taken(std::size_t(n), false);
        for (int c = 0; c < k; ++c) {
            if (counts[std::size_t(c)] > 0) {
                for (int d = 0; d < dim; ++d)
                    res.centroids[std::size_t(c) * dim + d] /= double(counts[std::size_t(c)]);
            } else {
                // farthest point from the stale centroid
                int far = -1;
                double fd = -1.0;
                for (int i = 0; i < n; ++i) {
                    if (taken[std::size_t(i)]) continue;
                    const double d = detail::sq_dist(points.data() + std::size_t(i) * dim,
                                                     old_centroids.data() + std::size_t(c) * dim, dim);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                taken[std::size_t(far)] = true;
                std::copy_n(points.data() + std::size_t(far) * dim, dim,
                            res.centroids.data() + std::size_t(c) * dim);
            }
        }

        if (res.assignments == prev) {
            res.converged = true;
            break;
        }
        prev = res.assignments;
    }

    if (!res.converged) // refresh wk against the final centroids
        res.wk = assign_pass(false);
    return res;
}

/// Decaying candidate-count schedule: k0 = floor(3N/4), k_{t+1} = floor(0.9 k_t),
/// stopping at k_min.
inline std::vector<int> k_schedule(std::int64_t n_pixels, int k_min = 2) {
    if (n_pixels < 2) throw EmptyInput("k_schedule: need at least 2 pixels");
    std::vector<int> ks;
    std::int64_t k = (3 * n_pixels) / 4;
    while (k >= k_min) {
        if (ks.empty() || ks.back() != int(k)) ks.push_back(int(k));
        k = (9 * k) / 10;
    }
    return ks;
}

struct GapResult {
    struct Record {
        int k = 0;
        double wk = 0.0;
        double gap = 0.0;
        double sk = 0.0;
    };
    std::vector<Record> records; // sorted by k ascending
    int chosen_k = 0;
    bool no_elbow = false;
};

/// Gap statistic over a candidate list: B reference sets drawn uniformly
/// over the data bounding box, Gap(k) = mean_b log W*_kb - log W_k,
/// s_k = sd_b(log W*_kb) * sqrt(1 + 1/B). Chooses the smallest k with
/// Gap(k) >= Gap(k+1) - s_{k+1}; falls back to max(ks) with no_elbow set.
inline GapResult gap_statistic(const std::vector<double>& points, int n, int dim,
                               const std::vector<int>& ks, int B, std::uint64_t seed) {
    if (ks.empty()) throw EmptyInput("gap_statistic: no candidate ks");
    if (!std::is_sorted(ks.begin(), ks.end()))
        throw Error("gap_statistic: candidate ks must be sorted ascending");
    if (B < 1) throw Error("gap_statistic: B must be >= 1");

    std::vector<double> lo(std::size_t(dim), std::numeric_limits<double>::infinity());
    std::vector<double> hi(std::size_t(dim), -std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) {
            const double v = points[std::size_t(i) * dim + d];
            lo[std::size_t(d)] = std::min(lo[std::size_t(d)], v);
            hi[std::size_t(d)] = std::max(hi[std::size_t(d)], v);
        }

    const int nk = int(ks.size());
    std::vector<double> log_wk(std::size_t(nk), 0.0);
    std::vector<double> log_wkb(std::size_t(nk) * B, 0.0);

    const auto safe_log = [](double w) { return std::log(std::max(w, 1e-300)); };

    // job b == 0 clusters the data; jobs 1..B cluster reference draws
    parallel_for(std::int64_t(B) + 1, [&](std::int64_t b) {
        if (b == 0) {
            for (int i = 0; i < nk; ++i) {
                const auto r = kmeans(points, n, dim, ks[std::size_t(i)],
                                      detail::mix_seed(seed, std::uint64_t(ks[std::size_t(i)]), 0));
                log_wk[std::size_t(i)] = safe_log(r.wk);
            }
        } else {
            std::mt19937_64 rng(detail::mix_seed(seed, 0, std::uint64_t(b)));
            std::vector<double> ref(std::size_t(n) * dim);
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < dim; ++d) {
                    std::uniform_real_distribution<double> u(lo[std::size_t(d)], hi[std::size_t(d)]);
                    ref[std::size_t(i) * dim + d] =
                        lo[std::size_t(d)] == hi[std::size_t(d)] ? lo[std::size_t(d)] : u(rng);
                }
            for (int i = 0; i < nk; ++i) {
                const auto r = kmeans(ref, n, dim, ks[std::size_t(i)],
                                      detail::mix_seed(seed, std::uint64_t(ks[std::size_t(i)]),
                                                       std::uint64_t(b)));
                log_wkb[std::size_t(i) * B + (b - 1)] = safe_log(r.wk);
            }
        }
    });

    GapResult out;
    out.records.resize(std::size_t(nk));
    for (int i = 0; i < nk; ++i) {
        double mean = 0.0;
        for (int b = 0; b < B; ++b) mean += log_wkb[std::size_t(i) * B + b];
        mean /= double(B);
        double var = 0.0;
        for (int b = 0; b < B; ++b) {
            const double d = log_wkb[std::size_t(i) * B + b] - mean;
            var += d * d;
        }
        var /= double(B); // population variance, so B=1 stays finite
        auto& rec = out.records[std::size_t(i)];
        rec.k = ks[std::size_t(i)];
        rec.wk = std::exp(log_wk[std::size_t(i)]);
        rec.gap = mean - log_wk[std::size_t(i)];
        rec.sk = std::sqrt(var) * std::sqrt(1.0 + 1.0 / double(B));
    }

    out.chosen_k = ks.back();
    out.no_elbow = true;
    for (int i = 0; i + 1 < nk; ++i) {
        if (out.records[std::size_t(i)].gap >=
            out.records[std::size_t(i) + 1].gap - out.records[std::size_t(i) + 1].sk) {
            out.chosen_k = ks[std::size_t(i)];
            out.no_elbow = false;
            break;
        }
    }
    return out;
}

inline std::string gap_to_csv(const GapResult& gap) {
    std::string out = "k,wk,gap,sk\n";
    char buf[120];
    for (const auto& r : gap.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.k, r.wk, r.gap, r.sk);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// label maps from pooled features
// ---------------------------------------------------------------------------

struct ClusterConfig {
    int k_max = 16;
    int k_min = 2;
    int B = 20;
    int subsample = 10000;
    std::uint64_t seed = 0;
    double temperature_scale = 1.0; // multiplies the mean nearest-distance temperature
};

inline LabelMap label_against_centroids(const FeatureStack& feats,
                                        const std::vector<double>& centroids, int k) {
    LabelMap map = make_label_map(feats.width, feats.height, k);
    parallel_for(std::int64_t(feats.pixels()), [&](std::int64_t p) {
        const double* x = feats.pixel(std::size_t(p));
        int best = 0;
        double bd = detail::sq_dist(x, centroids.data(), feats.depth);
        for (int c = 1; c < k; ++c) {
            const double d = detail::sq_dist(x, centroids.data() + std::size_t(c) * feats.depth,
                                             feats.depth);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        map.labels[std::size_t(p)] = best;
    });
    return map;
}

/// Softmax relaxation over negative squared centroid distances. At
/// temperature -> 0 this collapses to the one-hot hard assignment.
inline SoftLabelMap soften_against_centroids(const FeatureStack& feats,
                                             const std::vector<double>& centroids, int k,
                                             double temperature) {
    SoftLabelMap soft = make_soft_label_map(feats.width, feats.height, k);
    parallel_for(std::int64_t(feats.pixels()), [&](std::int64_t p) {
        const double* x = feats.pixel(std::size_t(p));
        std::vector<double> d2(static_cast<std::size_t>(k));
        double dmin = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            d2[std::size_t(c)] =
                detail::sq_dist(x, centroids.data() + std::size_t(c) * feats.depth, feats.depth);
            dmin = std::min(dmin, d2[std::size_t(c)]);
        }
        if (temperature <= 1e-12) {
            int best = 0;
            for (int c = 1; c < k; ++c)
                if (d2[std::size_t(c)] < d2[std::size_t(best)]) best = c;
            for (int c = 0; c < k; ++c)
                soft.planes[std::size_t(c) * feats.pixels() + std::size_t(p)] = c == best ? 1.0 : 0.0;
            return;
        }
        double z = 0.0;
        for (int c = 0; c < k; ++c) {
            const double w = std::exp(-(d2[std::size_t(c)] - dmin) / temperature);
            soft.planes[std::size_t(c) * feats.pixels() + std::size_t(p)] = w;
            z += w;
        }
        for (int c = 0; c < k; ++c)
            soft.planes[std::size_t(c) * feats.pixels() + std::size_t(p)] /= z;
    });
    return soft;
}

inline double mean_nearest_distance(const FeatureStack& feats, const std::vector<double>& centroids,
                                    int k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < feats.pixels(); ++p) {
        const double* x = feats.pixel(p);
        double bd = detail::sq_dist(x, centroids.data(), feats.depth);
        for (int c = 1; c < k; ++c)
            bd = std::min(bd, detail::sq_dist(x, centroids.data() + std::size_t(c) * feats.depth,
                                              feats.depth));
        acc += bd;
    }
    return feats.pixels() ? acc / double(feats.pixels()) : 0.0;
}

struct LabelMapsResult {
    LabelMap ref_labels;
    LabelMap flt_labels;
    SoftLabelMap ref_soft;
    SoftLabelMap flt_soft;
    GapResult gap;
};

/// Pools the pixels of both feature stacks, picks k with the gap statistic
/// over the decay-schedule candidates, fits one shared codebook, and labels
/// each image against it so class identities correspond across the pair.
inline LabelMapsResult make_label_maps(const FeatureStack& ref_feats,
                                       const FeatureStack& flt_feats, const ClusterConfig& cfg) {
    if (ref_feats.depth != flt_feats.depth)
        throw DepthMismatch("make_label_maps: feature depths differ");
    const int dim = ref_feats.depth;
    const std::int64_t total = std::int64_t(ref_feats.pixels()) + std::int64_t(flt_feats.pixels());

    std::vector<int> candidates;
    for (int k : k_schedule(total, cfg.k_min)) {
        const int clipped = std::min(k, cfg.k_max);
        if (clipped >= cfg.k_min) candidates.push_back(clipped);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const int m = int(std::min<std::int64_t>(cfg.subsample, total));
    std::vector<double> sample(std::size_t(m) * dim);
    {
        const auto fetch = [&](std::int64_t idx) {
            return idx < std::int64_t(ref_feats.pixels())
                       ? ref_feats.pixel(std::size_t(idx))
                       : flt_feats.pixel(std::size_t(idx - std::int64_t(ref_feats.pixels())));
        };
        if (m == total) {
            for (std::int64_t i = 0; i < total; ++i)
                std::copy_n(fetch(i), dim, sample.data() + std::size_t(i) * dim);
        } else {
            std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
            for (std::int64_t i = 0; i < total; ++i) idx[std::size_t(i)] = i;
            std::mt19937_64 rng(detail::mix_seed(cfg.seed, 1));
            for (int i = 0; i < m; ++i) {
                std::uniform_int_distribution<std::int64_t> pick(i, total - 1);
                std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
                std::copy_n(fetch(idx[std::size_t(i)]), dim, sample.data() + std::size_t(i) * dim);
            }
        }
    }

    while (!candidates.empty() && candidates.back() > m) candidates.pop_back();
    if (candidates.empty()) candidates.push_back(std::min(cfg.k_min, m));

    LabelMapsResult out;
    out.gap = gap_statistic(sample, m, dim, candidates, cfg.B, detail::mix_seed(cfg.seed, 2));
    const int k = out.gap.chosen_k;

    const auto codebook = kmeans(sample, m, dim, k, detail::mix_seed(cfg.seed, 3));

    out.ref_labels = label_against_centroids(ref_feats, codebook.centroids, k);
    out.flt_labels = label_against_centroids(flt_feats, codebook.centroids, k);
    const double tau_ref =
        cfg.temperature_scale * mean_nearest_distance(ref_feats, codebook.centroids, k);
    const double tau_flt =
        cfg.temperature_scale * mean_nearest_distance(flt_feats, codebook.centroids, k);
    out.ref_soft = soften_against_centroids(ref_feats, codebook.centroids, k, tau_ref);
    out.flt_soft = soften_against_centroids(flt_feats, codebook.centroids, k, tau_flt);
    return out;
}

} // namespace srnet
