#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "srnet/features.hpp"
#include "oracles.hpp"

using namespace srnet;

TEST_CASE("constant image yields all-zero standardized features") {
    const Image img = make_image(16, 16, 0.6);
    const FeatureStack fs = extract(img, {});
    REQUIRE(fs.depth == 18);
    for (double v : fs.data) CHECK(v == 0.0);
}

TEST_CASE("extraction is deterministic") {
    std::mt19937_64 rng(2);
    const Image img = oracles::random_image(16, 12, rng);
    const FeatureStack a = extract(img, {});
    const FeatureStack b = extract(img, {});
    CHECK(a.data == b.data);
}

TEST_CASE("depth depends only on the config") {
    std::mt19937_64 rng(3);
    FeatureConfig cfg;
    const FeatureStack small = extract(oracles::random_image(8, 8, rng), cfg);
    const FeatureStack big = extract(oracles::random_image(32, 24, rng), cfg);
    CHECK(small.depth == feature_depth(cfg));
    CHECK(big.depth == feature_depth(cfg));

    cfg.scales = 2;
    CHECK(extract(oracles::random_image(8, 8, rng), cfg).depth == 12);
}

TEST_CASE("images below the pooling minimum are rejected") {
    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(extract(oracles::random_image(7, 16, rng), {}), ImageTooSmall);
    CHECK_THROWS_AS(extract(oracles::random_image(16, 7, rng), {}), ImageTooSmall);
}

TEST_CASE("standardized channels have zero mean and unit variance") {
    std::mt19937_64 rng(5);
    const Image img = oracles::random_image(24, 16, rng);
    const FeatureStack fs = extract(img, {});
    const double n = double(fs.pixels());
    for (int c = 0; c < fs.depth; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t p = 0; p < fs.pixels(); ++p) mean += fs.data[p * fs.depth + c];
        mean /= n;
        for (std::size_t p = 0; p < fs.pixels(); ++p) {
            const double d = fs.data[p * fs.depth + c] - mean;
            var += d * d;
        }
        var /= n;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("isotropic channels mirror with the image") {
    std::mt19937_64 rng(6);
    const Image img = oracles::random_image(16, 16, rng);
    Image mirrored = make_image(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            mirrored.at(x, y) = img.at(15 - x, y);

    const FeatureStack fa = extract(img, {});
    const FeatureStack fb = extract(mirrored, {});
    for (int c = 0; c < fa.depth; ++c) {
        const int in_scale = c % kChannelsPerScale;
        if (in_scale == 2 || in_scale == 3) continue; // directional derivatives excluded
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(fb.at(x, y, c) == Catch::Approx(fa.at(15 - x, y, c)).margin(1e-9));
    }
}

TEST_CASE("feature_distance is the squared Euclidean distance") {
    FeatureStack a;
    a.width = 2;
    a.height = 1;
    a.depth = 3;
    a.data = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    CHECK(feature_distance(a, 0, a, 0) == 0.0);
    CHECK(feature_distance(a, 0, a, 1) == 2.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    FeatureStack b = a;
    for (auto& v : a.data) v = dist(rng);
    for (auto& v : b.data) v = dist(rng);
    double want = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = a.data[c] - b.data[std::size_t(3 + c)];
        want += d * d;
    }
    CHECK(feature_distance(a, 0, b, 1) == Catch::Approx(want).margin(1e-15));

    FeatureStack shallow = a;
    shallow.depth = 2;
    CHECK_THROWS_AS(feature_distance(a, 0, shallow, 0), DepthMismatch);
}
