#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "hydro/harmonic.hpp"
#include "hydro/rng.hpp"

using namespace hydro;

namespace {

double eval(const std::array<double, kNumCoeffs>& beta, double t) {
    const auto row = design_row(t);
    double y = 0.0;
    for (int j = 0; j < kNumCoeffs; ++j) y += row[j] * beta[j];
    return y;
}

// Independent oracle: solve the normal equations by Gaussian elimination
// with partial pivoting.
std::array<double, kNumCoeffs> ols_oracle(const std::vector<double>& ts,
                                          const std::vector<double>& ys) {
    constexpr int d = kNumCoeffs;
    double a[d][d + 1] = {};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto row = design_row(ts[i]);
        for (int j = 0; j < d; ++j) {
            a[j][d] += row[j] * ys[i];
            for (int k = 0; k < d; ++k) a[j][k] += row[j] * row[k];
        }
    }
    for (int col = 0; col < d; ++col) {
        int piv = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        for (int c = 0; c <= d; ++c) std::swap(a[col][c], a[piv][c]);
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c <= d; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, d> beta{};
    for (int j = 0; j < d; ++j) beta[j] = a[j][d] / a[j][j];
    return beta;
}

}  // namespace

TEST_CASE("design row phases at reference times") {
    const auto r0 = design_row(0.0);
    REQUIRE(r0 == std::array<double, 8>{1, 0, 1, 0, 1, 0, 1, 0});

    const auto r1 = design_row(kDaysPerYear);
    const std::array<double, 8> want1{1, 1, 1, 0, 1, 0, 1, 0};
    for (int j = 0; j < 8; ++j) REQUIRE(r1[j] == Catch::Approx(want1[j]).margin(1e-9));

    const auto rq = design_row(kDaysPerYear / 4.0);
    const std::array<double, 8> wantq{1, 0.25, 0, 1, -1, 0, 0, -1};
    for (int j = 0; j < 8; ++j) REQUIRE(rq[j] == Catch::Approx(wantq[j]).margin(1e-9));
}

TEST_CASE("constant series fits intercept only with zero rmse") {
    std::vector<double> ts, ys;
    for (int i = 0; i < 24; ++i) {
        ts.push_back(30.4 * i);
        ys.push_back(3.5);
    }
    const HarmonicModel m = fit_harmonic(ts, ys, 0.0);
    REQUIRE(m.coeffs[0] == Catch::Approx(3.5).margin(1e-8));
    for (int j = 1; j < kNumCoeffs; ++j) REQUIRE(m.coeffs[j] == Catch::Approx(0.0).margin(1e-8));
    REQUIRE(m.rmse == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("noiseless recovery of known coefficients at lambda = 0") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, kNumCoeffs> beta;
        for (auto& b : beta) b = rng.uniform(-1.0, 1.0);
        std::vector<double> ts, ys;
        for (int i = 0; i < 50; ++i) {
            const double t = 30.4375 * i;
            ts.push_back(t);
            ys.push_back(eval(beta, t));
        }
        const HarmonicModel m = fit_harmonic(ts, ys, 0.0);
        for (int j = 0; j < kNumCoeffs; ++j)
            REQUIRE(m.coeffs[j] == Catch::Approx(beta[j]).margin(1e-6));
    }
}

TEST_CASE("lambda = 0 matches a direct normal-equations solve within 1e-8") {
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> ts, ys;
        for (int i = 0; i < 40; ++i) {
            ts.push_back(20.0 * i + rng.uniform(0.0, 10.0));
            ys.push_back(rng.uniform(-1.0, 1.0));
        }
        const HarmonicModel m = fit_harmonic(ts, ys, 0.0);
        const auto oracle = ols_oracle(ts, ys);
        for (int j = 0; j < kNumCoeffs; ++j)
            REQUIRE(m.coeffs[j] == Catch::Approx(oracle[j]).margin(1e-8));
    }
}

TEST_CASE("huge lambda zeroes all penalized coefficients") {
    Rng rng(44);
    std::vector<double> ts, ys;
    double sum = 0.0;
    for (int i = 0; i < 36; ++i) {
        ts.push_back(30.4375 * i);
        ys.push_back(rng.uniform(0.0, 0.3));
        sum += ys.back();
    }
    const HarmonicModel m = fit_harmonic(ts, ys, 1e6);
    REQUIRE(m.coeffs[0] == Catch::Approx(sum / 36.0).margin(1e-9));
    for (int j = 1; j < kNumCoeffs; ++j) REQUIRE(m.coeffs[j] == 0.0);
}

TEST_CASE("lasso objective at the solution beats the zero point") {
    Rng rng(45);
    for (double lambda : {0.01, 0.1, 1.0}) {
        std::vector<double> ts, ys;
        for (int i = 0; i < 30; ++i) {
            ts.push_back(30.4375 * i);
            ys.push_back(0.1 + 0.05 * std::sin(2 * 3.14159 * ts.back() / 365.25) +
                         rng.normal(0.0, 0.01));
        }
        const HarmonicModel m = fit_harmonic(ts, ys, lambda);
        const auto objective = [&](const std::array<double, kNumCoeffs>& beta) {
            double obj = 0.0;
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const double r = ys[i] - eval(beta, ts[i]);
                obj += r * r;
            }
            for (int j = 1; j < kNumCoeffs; ++j) obj += lambda * std::abs(beta[j]);
            return obj;
        };
        REQUIRE(objective(m.coeffs) <= objective({}) + 1e-12);
    }
}

TEST_CASE("one-predictor shrinkage is monotone in lambda") {
    // With a single active harmonic, |beta| must not grow as lambda grows.
    std::vector<double> ts, ys;
    for (int i = 0; i < 48; ++i) {
        ts.push_back(30.4375 * i);
        ys.push_back(0.08 * std::cos(2 * std::numbers::pi * ts.back() / 365.25));
    }
    double prev = 1e9;
    for (double lambda : {0.0, 0.01, 0.05, 0.2, 1.0, 5.0}) {
        const HarmonicModel m = fit_harmonic(ts, ys, lambda);
        REQUIRE(std::abs(m.coeffs[2]) <= prev + 1e-12);
        prev = std::abs(m.coeffs[2]);
    }
}

TEST_CASE("too few observations is an error") {
    std::vector<double> ts{0, 1, 2}, ys{1, 2, 3};
    REQUIRE_THROWS_AS(fit_harmonic(ts, ys, 0.0), data_error);
}

TEST_CASE("rank-deficient design with lambda = 0 is a singularity error") {
    // 8 copies of the same timestamp: rank 1.
    std::vector<double> ts(10, 100.0), ys(10, 1.0);
    REQUIRE_THROWS_AS(fit_harmonic(ts, ys, 0.0), data_error);
}

TEST_CASE("rmse is the dof-corrected root mean squared residual") {
    std::vector<double> ts, ys;
    Rng rng(46);
    for (int i = 0; i < 30; ++i) {
        ts.push_back(30.4375 * i);
        ys.push_back(rng.uniform(0.0, 1.0));
    }
    const HarmonicModel m = fit_harmonic(ts, ys, 0.0);
    double sse = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = ys[i] - m.predict(ts[i]);
        sse += r * r;
    }
    // All 8 coefficients are active at lambda = 0.
    REQUIRE(m.rmse == Catch::Approx(std::sqrt(sse / 22.0)).margin(1e-12));
}
