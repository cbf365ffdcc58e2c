#include <catch2/catch_amalgamated.hpp>

#include "hydro/spectral.hpp"
#include "hydro/synth.hpp"

using namespace hydro;

namespace {

Scenario base_scenario() {
    Scenario sc;
    sc.width = 16;
    sc.height = 16;
    sc.lakes = {{8.0, 8.0, 4.0, 4.0}};
    sc.t0 = 5113.0;
    sc.t1 = sc.t0 + 365.25 * 8;
    sc.noise_sigma = 0.0;
    sc.cloud_prob = 0.0;
    sc.seed = 3;
    return sc;
}

}  // namespace

TEST_CASE("cloud_prob = 1 flags every qa sample") {
    Scenario sc = base_scenario();
    sc.cloud_prob = 1.0;
    const auto [stack, truth] = generate(sc);
    for (const auto& qa : stack.qa)
        for (auto v : qa.samples) REQUIRE(v == 1);
}

TEST_CASE("noiseless stable lake: MNDWI mask equals true water mask") {
    const auto [stack, truth] = generate(base_scenario());
    for (std::size_t s = 0; s < stack.n_scenes(); ++s) {
        const auto mask = water_mask(compute_mndwi(stack.bands[s][kGreen], stack.bands[s][kSwir1]));
        REQUIRE(mask.samples == truth.water[s]);
    }
}

TEST_CASE("same seed gives bit-identical stacks") {
    Scenario sc = base_scenario();
    sc.noise_sigma = 0.015;
    sc.cloud_prob = 0.1;
    const auto [a, ta] = generate(sc);
    const auto [b, tb] = generate(sc);
    REQUIRE(a.times == b.times);
    for (std::size_t s = 0; s < a.n_scenes(); ++s) {
        for (int band = 0; band < kNumBands; ++band)
            REQUIRE(a.bands[s][band].samples == b.bands[s][band].samples);
        REQUIRE(a.qa[s].samples == b.qa[s].samples);
    }
}

TEST_CASE("true_wf on stable geometry") {
    const auto [stack, truth] = generate(base_scenario());
    const double t0 = truth.times.front(), t1 = truth.times.back();
    REQUIRE(true_wf(truth, 8, 8, t0, t1) == 1.0);   // lake interior
    REQUIRE(true_wf(truth, 0, 0, t0, t1) == 0.0);   // corner land
}

TEST_CASE("seasonal shoreline pixel has genuinely fractional wf") {
    Scenario sc = base_scenario();
    sc.lakes[0].dynamics = LakeDynamics::kSeasonal;
    sc.lakes[0].amplitude = 0.3;
    const auto [stack, truth] = generate(sc);
    const double t0 = truth.times.front(), t1 = truth.times.back();
    // A ring pixel between min and max radius toggles within each year.
    const double wf = true_wf(truth, 8, 8 + 4, t0, t1);
    REQUIRE(wf > 0.0);
    REQUIRE(wf < 1.0);
}

TEST_CASE("break truth marks exactly the pixels whose state changes") {
    Scenario sc = base_scenario();
    sc.lakes[0].dynamics = LakeDynamics::kShrink;
    sc.lakes[0].t_break = sc.t0 + 365.25 * 4;
    sc.lakes[0].factor = 0.5;
    const auto [stack, truth] = generate(sc);
    for (std::uint32_t y = 0; y < sc.height; ++y)
        for (std::uint32_t x = 0; x < sc.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * sc.width + x;
            const bool pre = truth.state(x, y, 0) == 1;
            const bool post = truth.state(x, y, truth.times.size() - 1) == 1;
            if (pre != post) {
                REQUIRE(truth.break_times[p] == std::vector<double>{sc.lakes[0].t_break});
            } else {
                REQUIRE(truth.break_times[p].empty());
            }
        }
}

TEST_CASE("disturbance changes land spectra but not water masks") {
    Scenario sc = base_scenario();
    sc.disturbances = {{0, 0, 3, 3, sc.t0 + 365.25 * 4}};
    const auto [stack, truth] = generate(sc);
    const std::size_t last = stack.n_scenes() - 1;
    // nir shifted on disturbed land...
    REQUIRE(stack.bands[last][kNir].at(1, 1) ==
            Catch::Approx(kLandArchetype[kNir] + kDisturbShift[kNir] +
                          sc.band_seasonal_amplitude *
                              std::sin(2.0 * std::numbers::pi * stack.times[last] / kDaysPerYear))
                .margin(1e-6));
    // ...green/swir1 untouched, so the mask is unchanged.
    const auto mask = water_mask(compute_mndwi(stack.bands[last][kGreen], stack.bands[last][kSwir1]));
    REQUIRE(mask.samples == truth.water[last]);
    REQUIRE(truth.break_times[static_cast<std::size_t>(1) * sc.width + 1] ==
            std::vector<double>{sc.disturbances[0].t_break});
}

TEST_CASE("degenerate scenario is rejected") {
    Scenario sc = base_scenario();
    sc.width = 0;
    REQUIRE_THROWS_AS(generate(sc), config_error);
}

TEST_CASE("scenario JSON round-trip") {
    Scenario sc = base_scenario();
    sc.lakes[0].dynamics = LakeDynamics::kGrow;
    sc.lakes[0].t_break = 6000.0;
    sc.disturbances = {{1, 2, 3, 4, 6100.0}};
    nlohmann::json j = sc;
    const Scenario back = j.get<Scenario>();
    REQUIRE(back.width == sc.width);
    REQUIRE(back.lakes.size() == 1);
    REQUIRE(back.lakes[0].dynamics == LakeDynamics::kGrow);
    REQUIRE(back.disturbances.size() == 1);
    REQUIRE(back.seed == sc.seed);
    const auto [a, ta] = generate(sc);
    const auto [b, tb] = generate(back);
    REQUIRE(a.bands[0][0].samples == b.bands[0][0].samples);
}
