#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "srnet/clustering.hpp"
#include "srnet/losses.hpp"
#include "srnet/synth.hpp"
#include "oracles.hpp"

using namespace srnet;

TEST_CASE("elastic field: zero amplitude, exact rescaling, determinism") {
    const DisplacementField zero = elastic_field(32, 24, 0.0, 4.0, 5);
    for (double v : zero.u) CHECK(v == 0.0);

    const DisplacementField f = elastic_field(32, 24, 6.5, 4.0, 5);
    double max_mag = 0.0;
    for (std::size_t p = 0; p < f.pixels(); ++p)
        max_mag = std::max(max_mag, std::hypot(f.u[2 * p], f.u[2 * p + 1]));
    CHECK(max_mag == Catch::Approx(6.5).margin(1e-6));

    const DisplacementField g = elastic_field(32, 24, 6.5, 4.0, 5);
    CHECK(f.u == g.u);
    const DisplacementField other = elastic_field(32, 24, 6.5, 4.0, 6);
    CHECK(f.u != other.u);
}

TEST_CASE("larger smoothing sigma gives smoother fields") {
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {2.0, 4.0, 8.0}) {
        std::vector<double> per_pixel;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const DisplacementField f = elastic_field(48, 48, 8.0, sigma, seed);
            per_pixel.push_back(loss_smooth(f) / double(f.pixels()));
        }
        std::sort(per_pixel.begin(), per_pixel.end());
        const double median = per_pixel[5];
        CHECK(median < prev);
        prev = median;
    }
}

TEST_CASE("make_pair: exact identity at zero amplitude and landmark consistency") {
    const auto [base, regions] = structured_image(48, 48, 3, 7);
    const LandmarkSet grid = grid_landmarks(48, 48, 5, 10.0);

    const SynthPair still = make_pair(base, grid, 0.0, 8.0, 0.0, 7);
    CHECK(still.floating.data == base.data);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(still.flt_landmarks.points[i].x == grid.points[i].x);
        CHECK(still.flt_landmarks.points[i].y == grid.points[i].y);
    }

    const SynthPair pair = make_pair(base, grid, 6.0, 8.0, 0.01, 7);
    const LandmarkSet transferred = warp_points(pair.ref_landmarks, pair.true_field);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::abs(pair.flt_landmarks.points[i].x - transferred.points[i].x) < 1e-6);
        CHECK(std::abs(pair.flt_landmarks.points[i].y - transferred.points[i].y) < 1e-6);
    }

    // pre-registration TRE equals the field magnitude at the landmarks
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double dx = pair.flt_landmarks.points[i].x - pair.ref_landmarks.points[i].x;
        const double dy = pair.flt_landmarks.points[i].y - pair.ref_landmarks.points[i].y;
        const double tre = std::hypot(dx, dy);
        CHECK(tre <= 6.0 + 1e-9);
    }

    LandmarkSet outside = grid;
    outside.points.push_back({-1.0, 0.0});
    CHECK_THROWS_AS(make_pair(base, outside, 1.0, 4.0, 0.0, 1), PointOutOfDomain);
}

TEST_CASE("make_pair images stay in range and the field links them") {
    const auto [base, regions] = structured_image(40, 40, 4, 3);
    const LandmarkSet grid = grid_landmarks(40, 40, 4, 9.0);

    // without noise, warping the floating image by the true field reproduces
    // the reference bit for bit
    const SynthPair clean = make_pair(base, grid, 5.0, 6.0, 0.0, 3);
    const Image rewarped = warp_image(clean.floating, clean.true_field);
    CHECK(rewarped.data == clean.reference.data);

    const SynthPair pair = make_pair(base, grid, 5.0, 6.0, 0.01, 3);
    for (double v : pair.floating.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    double max_dev = 0.0;
    for (std::size_t i = 0; i < pair.floating.data.size(); ++i)
        max_dev = std::max(max_dev, std::abs(pair.floating.data[i] - clean.floating.data[i]));
    CHECK(max_dev < 0.08); // only the clamped additive noise separates them

    const SynthPair again = make_pair(base, grid, 5.0, 6.0, 0.01, 3);
    CHECK(again.floating.data == pair.floating.data);
    CHECK(again.true_field.u == pair.true_field.u);
}

TEST_CASE("structured_image plants the requested regions") {
    const auto [img2, regions2] = structured_image(32, 32, 2, 13);
    std::set<int> seen(regions2.labels.begin(), regions2.labels.end());
    CHECK(seen == std::set<int>{0, 1});

    const auto [img, regions] = structured_image(64, 64, 5, 13);
    std::set<int> seen5(regions.labels.begin(), regions.labels.end());
    CHECK(int(seen5.size()) == 5);

    // region base intensities stay pairwise separated by >= 0.15
    std::vector<double> level(5, -1.0);
    std::vector<std::vector<double>> samples(5);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        samples[std::size_t(regions.labels[i])].push_back(img.data[i]);
    for (int r = 0; r < 5; ++r) {
        double acc = 0.0;
        for (double v : samples[std::size_t(r)]) acc += v;
        level[std::size_t(r)] = acc / double(samples[std::size_t(r)].size());
    }
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b)
            CHECK(std::abs(level[std::size_t(a)] - level[std::size_t(b)]) >= 0.15);

    CHECK_THROWS_AS(structured_image(32, 32, 1, 0), Error);
}

TEST_CASE("clustering an identical structured pair recovers the planted regions") {
    const auto [img, regions] = structured_image(48, 48, 3, 29);
    const FeatureStack feats = extract(img, {});
    ClusterConfig cfg;
    cfg.B = 10;
    cfg.k_max = 8;
    const auto maps = make_label_maps(feats, feats, cfg);
    CHECK(maps.gap.chosen_k >= 3); // fine-grained maps never merge planted regions

    // clusters nest within regions: majority mapping reproduces the planting
    const int K = maps.gap.chosen_k;
    std::vector<std::vector<std::int64_t>> overlap(std::size_t(K), std::vector<std::int64_t>(3, 0));
    for (std::size_t i = 0; i < regions.labels.size(); ++i)
        overlap[std::size_t(maps.ref_labels.labels[i])][std::size_t(regions.labels[i])]++;
    std::vector<int> region_of(std::size_t(K), 0);
    for (int c = 0; c < K; ++c)
        for (int r = 1; r < 3; ++r)
            if (overlap[std::size_t(c)][std::size_t(r)] >
                overlap[std::size_t(c)][std::size_t(region_of[std::size_t(c)])])
                region_of[std::size_t(c)] = r;
    for (int region = 0; region < 3; ++region) {
        std::int64_t na = 0, nb = 0, ni = 0;
        for (std::size_t i = 0; i < regions.labels.size(); ++i) {
            const bool ia = region_of[std::size_t(maps.ref_labels.labels[i])] == region;
            const bool ib = regions.labels[i] == region;
            na += ia;
            nb += ib;
            ni += ia && ib;
        }
        CHECK(2.0 * double(ni) / double(na + nb) >= 0.95);
    }
}

TEST_CASE("planted_clusters invariants") {
    const auto one = planted_clusters(37, 1, 3, 5.0, 0.2, 1);
    CHECK(one.labels == std::vector<int>(37, 0));
    CHECK(one.points.size() == 37u * 3u);

    const auto planted = planted_clusters(100, 4, 2, 200.0 * 1.0, 1.0, 2);
    CHECK(planted.labels.size() == 100);
    const auto res = kmeans(planted.points, 100, 2, 4, 77);
    // separation/sigma = 200: recovery must be exact up to permutation
    std::vector<int> relabel(4, -1);
    bool consistent = true;
    for (std::size_t i = 0; i < planted.labels.size(); ++i) {
        const int truth = planted.labels[i];
        if (relabel[std::size_t(res.assignments[i])] == -1)
            relabel[std::size_t(res.assignments[i])] = truth;
        else if (relabel[std::size_t(res.assignments[i])] != truth)
            consistent = false;
    }
    CHECK(consistent);
}
