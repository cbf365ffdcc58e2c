#include <catch2/catch_amalgamated.hpp>

#include "hydro/rng.hpp"
#include "hydro/smote.hpp"

using namespace hydro;

TEST_CASE("two-point minority interpolates along the segment") {
    const std::vector<std::vector<double>> minority{{0.0, 0.0}, {1.0, 1.0}};
    const auto synth = smote(minority, 1, 50, 7);
    REQUIRE(synth.size() == 50);
    for (const auto& p : synth) {
        REQUIRE(p[0] == Catch::Approx(p[1]).margin(1e-12));
        REQUIRE(p[0] >= 0.0);
        REQUIRE(p[0] <= 1.0);
    }
}

TEST_CASE("zero synthetic request yields empty output") {
    REQUIRE(smote({{1.0}}, 5, 0, 1).empty());
}

TEST_CASE("singleton minority duplicates") {
    const auto synth = smote({{3.0, -1.0}}, 5, 4, 1);
    REQUIRE(synth == std::vector<std::vector<double>>(4, {3.0, -1.0}));
}

TEST_CASE("deterministic given seed") {
    Rng rng(5);
    std::vector<std::vector<double>> minority;
    for (int i = 0; i < 20; ++i) minority.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    REQUIRE(smote(minority, 5, 30, 42) == smote(minority, 5, 30, 42));
    REQUIRE(smote(minority, 5, 30, 42) != smote(minority, 5, 30, 43));
}

TEST_CASE("convex-hull property: every synthetic point lies on a segment") {
    Rng rng(6);
    std::vector<std::vector<double>> minority;
    for (int i = 0; i < 15; ++i) minority.push_back({rng.uniform(), rng.uniform()});
    const auto synth = smote(minority, 4, 200, 9);
    for (const auto& p : synth) {
        bool on_segment = false;
        for (std::size_t i = 0; i < minority.size() && !on_segment; ++i)
            for (std::size_t j = 0; j < minority.size() && !on_segment; ++j) {
                if (i == j) continue;
                // p = a + u (b - a) for some u in [0,1]?
                const auto &a = minority[i], &b = minority[j];
                const double dx = b[0] - a[0], dy = b[1] - a[1];
                const double u = std::abs(dx) > std::abs(dy) ? (p[0] - a[0]) / dx : (p[1] - a[1]) / dy;
                if (u < -1e-9 || u > 1.0 + 1e-9) continue;
                if (std::abs(a[0] + u * dx - p[0]) < 1e-9 && std::abs(a[1] + u * dy - p[1]) < 1e-9)
                    on_segment = true;
            }
        REQUIRE(on_segment);
    }
}

TEST_CASE("errors: empty minority, bad k") {
    REQUIRE_THROWS_AS(smote({}, 5, 1, 1), data_error);
    REQUIRE_THROWS_AS(smote({{1.0}}, 0, 1, 1), data_error);
}
