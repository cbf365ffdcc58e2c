#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydro/common.hpp"

namespace hydro {

// MSE normalized by the population variance of the truth; 1.0 equals
// predicting the mean.
inline double nmse(std::span<const double> pred, std::span<const double> truth) {
    const std::size_t n = truth.size();
    if (pred.size() != n) throw data_error("nmse: length mismatch");
    if (n < 2) throw data_error("nmse: need at least 2 values");
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(n);
    double mse = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = pred[i] - truth[i];
        mse += e * e;
        const double d = truth[i] - mean;
        var += d * d;
    }
    if (var == 0.0) throw data_error("nmse: zero-variance truth");
    return mse / var;
}

struct FoldStat {
    std::vector<double> values;  // one per fold, in region-id order

    double mean() const {
        if (values.empty()) return 0.0;
        return std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
    }

    // 95% half-width: 1.96 * sample standard deviation of the fold values.
    double ci_half_width() const {
        if (values.size() < 2) return 0.0;
        const double m = mean();
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        return 1.96 * std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
};

struct MetricsReport {
    std::vector<int> fold_regions;
    FoldStat overall;                        // accuracy (or NMSE in regression reports)
    std::map<int, FoldStat> per_class;       // class label -> recall across folds
    std::map<int, std::map<int, long>> confusion;  // truth -> pred -> count, summed over folds
    std::vector<std::string> notes;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["fold_regions"] = fold_regions;
        j["overall"] = {{"folds", overall.values},
                        {"mean", overall.mean()},
                        {"ci_half_width", overall.ci_half_width()}};
        j["per_class"] = nlohmann::json::object();
        for (const auto& [cls, stat] : per_class)
            j["per_class"][std::to_string(cls)] = {{"folds", stat.values},
                                                   {"mean", stat.mean()},
                                                   {"ci_half_width", stat.ci_half_width()}};
        j["confusion"] = nlohmann::json::object();
        for (const auto& [t, row] : confusion)
            for (const auto& [p, c] : row)
                j["confusion"][std::to_string(t)][std::to_string(p)] = c;
        j["notes"] = notes;
        return j;
    }
};

// Accuracy + per-class recall + confusion counts for one fold.
struct FoldMetrics {
    double overall = 0.0;
    std::map<int, double> recall;
    std::map<int, std::map<int, long>> confusion;
};

inline FoldMetrics accuracy_report(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw data_error("accuracy_report: length mismatch");
    if (truth.empty()) throw data_error("accuracy_report: empty input");
    FoldMetrics m;
    std::map<int, long> support, correct;
    long ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++support[truth[i]];
        ++m.confusion[truth[i]][pred[i]];
        if (pred[i] == truth[i]) {
            ++ok;
            ++correct[truth[i]];
        }
    }
    m.overall = static_cast<double>(ok) / static_cast<double>(truth.size());
    for (const auto& [cls, sup] : support)
        m.recall[cls] = static_cast<double>(correct[cls]) / static_cast<double>(sup);
    return m;
}

// Leave-one-region-out cross-validation. `run_fold` receives the indices of
// training and test samples for one fold (test = one region) and returns the
// fold metrics; folds are taken in ascending region-id order.
template <typename Sample>
MetricsReport cross_validate(
    const std::vector<Sample>& samples,
    const std::function<FoldMetrics(const std::vector<std::size_t>&, const std::vector<std::size_t>&)>&
        run_fold) {
    std::map<int, std::vector<std::size_t>> by_region;
    for (std::size_t i = 0; i < samples.size(); ++i) by_region[samples[i].region_id].push_back(i);
    if (by_region.size() < 2) throw data_error("cross_validate: need at least 2 regions");

    MetricsReport report;
    for (const auto& [region, test_idx] : by_region) {
        std::vector<std::size_t> train_idx;
        train_idx.reserve(samples.size() - test_idx.size());
        for (const auto& [r2, idx2] : by_region)
            if (r2 != region) train_idx.insert(train_idx.end(), idx2.begin(), idx2.end());

        const FoldMetrics fm = run_fold(train_idx, test_idx);
        report.fold_regions.push_back(region);
        report.overall.values.push_back(fm.overall);
        for (const auto& [cls, rec] : fm.recall) report.per_class[cls].values.push_back(rec);
        for (const auto& [t, row] : fm.confusion)
            for (const auto& [p, c] : row) report.confusion[t][p] += c;
    }
    return report;
}

inline std::string format_pm(double mean, double ci) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << mean << " ± " << ci;
    return os.str();
}

// Text table in the cross-validation report layout: one row per labeled
// metric, mean ± 95% half-width (1.96 x sample std of fold values).
inline std::string render_table(const std::string& title,
                                const std::vector<std::pair<std::string, FoldStat>>& rows) {
    std::size_t w = 0;
    for (const auto& [label, stat] : rows) w = std::max(w, label.size());
    std::ostringstream os;
    os << title << "\n";
    for (const auto& [label, stat] : rows) {
        os << "  " << label;
        os << std::string(w - label.size() + 2, ' ');
        os << format_pm(stat.mean(), stat.ci_half_width()) << "\n";
    }
    os << "  (CI: 1.96 x sample std of fold values)\n";
    return os.str();
}

}  // namespace hydro
