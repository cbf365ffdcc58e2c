#include <catch2/catch_amalgamated.hpp>

#include "hydro/rng.hpp"
#include "hydro/spectral.hpp"

using namespace hydro;

namespace {

Grid one_pixel(float v) {
    Grid g(1, 1);
    g.samples[0] = v;
    return g;
}

}  // namespace

TEST_CASE("mndwi basic values") {
    REQUIRE(compute_mndwi(one_pixel(0.30f), one_pixel(0.10f)).samples[0] ==
            Catch::Approx(0.5).epsilon(1e-6));
    REQUIRE(compute_mndwi(one_pixel(0.10f), one_pixel(0.10f)).samples[0] == 0.0f);
}

TEST_CASE("mndwi zero denominator and nodata propagate") {
    REQUIRE(compute_mndwi(one_pixel(0.0f), one_pixel(0.0f)).samples[0] == kNoData);
    REQUIRE(compute_mndwi(one_pixel(kNoData), one_pixel(0.1f)).samples[0] == kNoData);
    REQUIRE(compute_mndwi(one_pixel(0.1f), one_pixel(kNoData)).samples[0] == kNoData);
}

TEST_CASE("mndwi out-of-range ratio maps to nodata") {
    // Negative swir makes the ratio exceed 1.
    REQUIRE(compute_mndwi(one_pixel(0.2f), one_pixel(-0.1f)).samples[0] == kNoData);
}

TEST_CASE("mndwi shape mismatch") {
    Grid a(2, 2), b(3, 2);
    REQUIRE_THROWS_AS(compute_mndwi(a, b), data_error);
}

TEST_CASE("mndwi stays in [-1,1] for random non-negative reflectance") {
    Rng rng(7);
    Grid g(64, 64), s(64, 64);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.samples[i] = static_cast<float>(rng.uniform());
        s.samples[i] = static_cast<float>(rng.uniform());
    }
    const Grid m = compute_mndwi(g, s);
    for (float v : m.samples) {
        if (v == kNoData) continue;
        REQUIRE(v >= -1.0f);
        REQUIRE(v <= 1.0f);
    }
}

TEST_CASE("water mask thresholding with strict >") {
    Grid m(4, 1);
    m.samples = {0.01f, -0.2f, 0.0f, kNoData};
    const ClassGrid mask = water_mask(m);
    REQUIRE(mask.samples == std::vector<std::uint8_t>{1, 0, 0, kClassNoData});
}

TEST_CASE("mask antisymmetry under green/swir swap off-threshold") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = static_cast<float>(rng.uniform(0.01, 1.0));
        const auto s = static_cast<float>(rng.uniform(0.01, 1.0));
        if (g == s) continue;
        const auto fwd = water_mask(compute_mndwi(one_pixel(g), one_pixel(s))).samples[0];
        const auto rev = water_mask(compute_mndwi(one_pixel(s), one_pixel(g))).samples[0];
        REQUIRE(fwd != rev);
    }
}

TEST_CASE("apply_qa masks exactly where qa != 0 and is idempotent") {
    Rng rng(13);
    Grid band(8, 8);
    ClassGrid qa(8, 8);
    for (std::size_t i = 0; i < band.size(); ++i) {
        band.samples[i] = static_cast<float>(rng.uniform());
        qa.samples[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    const Grid masked = apply_qa(band, qa);
    for (std::size_t i = 0; i < band.size(); ++i) {
        if (qa.samples[i] != 0) REQUIRE(masked.samples[i] == kNoData);
        else REQUIRE(masked.samples[i] == band.samples[i]);
    }
    REQUIRE(apply_qa(masked, qa).samples == masked.samples);

    ClassGrid all_clear(8, 8, 0);
    REQUIRE(apply_qa(band, all_clear).samples == band.samples);
    ClassGrid all_cloud(8, 8, 1);
    for (float v : apply_qa(band, all_cloud).samples) REQUIRE(v == kNoData);
}
