#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hydro/common.hpp"
#include "hydro/rng.hpp"

namespace hydro {

// SMOTE: each synthetic point is x_i + u * (x_nn - x_i) with u ~ U[0,1] and
// x_nn drawn from the k nearest minority neighbors of x_i (Euclidean).
// A single-sample minority yields exact copies. Deterministic given seed.
inline std::vector<std::vector<double>> smote(const std::vector<std::vector<double>>& minority,
                                              int k, std::size_t n_synthetic, std::uint64_t seed) {
    if (minority.empty()) throw data_error("smote: empty minority class");
    if (k < 1) throw data_error("smote: k must be >= 1");
    const std::size_t n = minority.size();
    const std::size_t dim = minority[0].size();
    for (const auto& v : minority)
        if (v.size() != dim) throw data_error("smote: ragged input");

    Rng rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(n_synthetic);

    if (n == 1) {
        out.assign(n_synthetic, minority[0]);
        return out;
    }

    // Neighbor lists, computed once. Desk-scale minority sizes make the
    // quadratic scan acceptable.
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
    std::vector<std::vector<std::uint32_t>> neighbors(n);
    std::vector<std::pair<double, std::uint32_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t f = 0; f < dim; ++f) {
                const double d = minority[i][f] - minority[j][f];
                d2 += d * d;
            }
            dist.push_back({d2, static_cast<std::uint32_t>(j)});
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        neighbors[i].reserve(kk);
        for (std::size_t j = 0; j < kk; ++j) neighbors[i].push_back(dist[j].second);
    }

    for (std::size_t s = 0; s < n_synthetic; ++s) {
        const std::size_t i = rng.index(n);
        const std::uint32_t nn = neighbors[i][rng.index(neighbors[i].size())];
        const double u = rng.uniform();
        std::vector<double> x(dim);
        for (std::size_t f = 0; f < dim; ++f)
            x[f] = minority[i][f] + u * (minority[nn][f] - minority[i][f]);
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace hydro
