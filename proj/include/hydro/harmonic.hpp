#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "hydro/common.hpp"

namespace hydro {

inline constexpr int kNumCoeffs = 8;

// Per-band piecewise model: intercept, per-year slope, and three harmonic
// pairs at 1, 2, 3 cycles per year.
struct HarmonicModel {
    std::array<double, kNumCoeffs> coeffs{};
    double rmse = 0.0;

    double predict(double t_days) const;
};

// [1, t/365.25, cos(w1 t), sin(w1 t), cos(w2 t), sin(w2 t), cos(w3 t), sin(w3 t)],
// wk = 2*pi*k / 365.25.
inline std::array<double, kNumCoeffs> design_row(double t_days) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double phase = two_pi * t_days / kDaysPerYear;
    return {1.0,
            t_days / kDaysPerYear,
            std::cos(phase),
            std::sin(phase),
            std::cos(2.0 * phase),
            std::sin(2.0 * phase),
            std::cos(3.0 * phase),
            std::sin(3.0 * phase)};
}

inline double HarmonicModel::predict(double t_days) const {
    const auto row = design_row(t_days);
    double y = 0.0;
    for (int j = 0; j < kNumCoeffs; ++j) y += row[j] * coeffs[j];
    return y;
}

// Penalized least squares min_b sum (y - Xb)^2 + lambda * sum_{j>=1} |b_j|
// by cyclic coordinate descent on the normal equations; the intercept is
// unpenalized and lambda = 0 gives ordinary least squares through the same
// sweep. Stops when the largest coefficient update is below 1e-10 or after
// 1000 sweeps.
inline HarmonicModel fit_harmonic(std::span<const double> times, std::span<const double> values,
                                  double lambda) {
    const std::size_t n = times.size();
    if (n != values.size()) throw data_error("fit_harmonic: length mismatch");
    if (n < kNumCoeffs) throw data_error("fit_harmonic: need at least 8 observations");
    if (lambda < 0.0) throw data_error("fit_harmonic: negative penalty");

    // Gram matrix and X'y; 8x8, accumulated once.
    double xtx[kNumCoeffs][kNumCoeffs] = {};
    double xty[kNumCoeffs] = {};
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = design_row(times[i]);
        for (int j = 0; j < kNumCoeffs; ++j) {
            xty[j] += row[j] * values[i];
            for (int k = j; k < kNumCoeffs; ++k) xtx[j][k] += row[j] * row[k];
        }
    }
    for (int j = 0; j < kNumCoeffs; ++j)
        for (int k = 0; k < j; ++k) xtx[j][k] = xtx[k][j];

    for (int j = 0; j < kNumCoeffs; ++j)
        if (xtx[j][j] <= 0.0) throw data_error("fit_harmonic: degenerate design");

    if (lambda == 0.0) {
        // Unregularized solve requires full rank; check via Cholesky pivots.
        double chol[kNumCoeffs][kNumCoeffs] = {};
        double max_diag = 0.0;
        for (int j = 0; j < kNumCoeffs; ++j) max_diag = std::max(max_diag, xtx[j][j]);
        for (int j = 0; j < kNumCoeffs; ++j) {
            double d = xtx[j][j];
            for (int k = 0; k < j; ++k) d -= chol[j][k] * chol[j][k];
            if (d < 1e-11 * max_diag) throw data_error("fit_harmonic: rank-deficient design (lambda = 0)");
            chol[j][j] = std::sqrt(d);
            for (int i = j + 1; i < kNumCoeffs; ++i) {
                double s = xtx[i][j];
                for (int k = 0; k < j; ++k) s -= chol[i][k] * chol[j][k];
                chol[i][j] = s / chol[j][j];
            }
        }
    }

    std::array<double, kNumCoeffs> beta{};
    const double half_lambda = lambda / 2.0;  // soft-threshold level for the 2*sum form
    for (int sweep = 0; sweep < 1000; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < kNumCoeffs; ++j) {
            double r = xty[j];
            for (int k = 0; k < kNumCoeffs; ++k)
                if (k != j) r -= xtx[j][k] * beta[k];
            double b;
            if (j == 0 || lambda == 0.0) {
                b = r / xtx[j][j];
            } else {
                if (r > half_lambda) b = (r - half_lambda) / xtx[j][j];
                else if (r < -half_lambda) b = (r + half_lambda) / xtx[j][j];
                else b = 0.0;
            }
            max_delta = std::max(max_delta, std::abs(b - beta[j]));
            beta[j] = b;
        }
        if (max_delta < 1e-10) break;
    }

    // Rank deficiency shows up as non-finite or exploding coefficients when
    // the unregularized sweep is applied to a singular Gram matrix.
    for (double b : beta)
        if (!std::isfinite(b)) throw data_error("fit_harmonic: singular design (lambda = 0)");

    HarmonicModel model;
    model.coeffs = beta;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = values[i] - model.predict(times[i]);
        sse += r * r;
    }
    // Unbiased noise estimate: divide by residual degrees of freedom (active
    // coefficients), not n. The raw mean-squared form underestimates sigma on
    // short fit windows and inflates downstream change scores.
    int active = 0;
    for (double b : beta) active += b != 0.0;
    const auto dof = static_cast<double>(std::max<std::size_t>(n - static_cast<std::size_t>(active), 1));
    model.rmse = std::sqrt(sse / dof);
    return model;
}

}  // namespace hydro
