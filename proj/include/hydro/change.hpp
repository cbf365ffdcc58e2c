#pragma once

#include <algorithm>
#include <vector>

#include <json.hpp>

#include "hydro/gbt.hpp"
#include "hydro/labeling.hpp"
#include "hydro/metrics.hpp"
#include "hydro/smote.hpp"

namespace hydro {

struct ChangeRecord {
    std::uint32_t x = 0, y = 0;
    double break_time = 0.0;
    std::vector<double> features_before;  // 56
    std::vector<double> features_after;   // 56
    double wf_before = -1.0, wf_after = -1.0;  // labels when available, else -1
    int delta_class = 0;  // -1 decrease, 0 unchanged, +1 increase
    int region_id = 0;

    bool labeled() const { return wf_before >= 0.0 && wf_after >= 0.0; }

    std::vector<double> concat_features() const {
        std::vector<double> f = features_before;
        f.insert(f.end(), features_after.begin(), features_after.end());
        return f;
    }
};

// d = after - before; +1 above the threshold, -1 below its negation, 0
// otherwise (ties at exactly +-threshold are "unchanged").
inline int classify_delta(double wf_before, double wf_after, double threshold = 0.25) {
    if (wf_before < 0.0 || wf_before > 1.0 || wf_after < 0.0 || wf_after > 1.0)
        throw data_error("classify_delta: wf out of [0,1]");
    const double d = wf_after - wf_before;
    if (d > threshold) return 1;
    if (d < -threshold) return -1;
    return 0;
}

// One record per adjacent segment pair whose earlier segment ended in a
// confirmed break. Output sorted by (x, y, break_time).
inline std::vector<ChangeRecord> extract_break_pairs(const std::vector<PixelSegments>& pixels,
                                                     int region_id = 0) {
    std::vector<ChangeRecord> records;
    for (const auto& px : pixels) {
        for (std::size_t k = 0; k + 1 < px.segments.size(); ++k) {
            const Segment& before = px.segments[k];
            if (!before.ended_by_break) continue;
            ChangeRecord rec;
            rec.x = px.x;
            rec.y = px.y;
            rec.break_time = before.break_time;
            rec.features_before = before.features();
            rec.features_after = px.segments[k + 1].features();
            rec.region_id = region_id;
            records.push_back(std::move(rec));
        }
    }
    std::sort(records.begin(), records.end(), [](const ChangeRecord& a, const ChangeRecord& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.break_time < b.break_time;
    });
    return records;
}

// Regression-difference path: predict WF on each side and classify the delta.
inline int change_via_regression(const BoostedModel& regressor, const ChangeRecord& rec,
                                 double threshold = 0.25) {
    return classify_delta(regressor.predict_wf(rec.features_before),
                          regressor.predict_wf(rec.features_after), threshold);
}

namespace change_detail {

inline std::size_t class_index(int delta) { return static_cast<std::size_t>(delta + 1); }  // -1,0,+1 -> 0,1,2
inline int class_delta(std::size_t idx) { return static_cast<int>(idx) - 1; }

}  // namespace change_detail

// 3-class boosted classifier on the 112-dim concatenated features. With
// use_smote, minority classes are oversampled to the majority count before
// training (training data only).
inline BoostedModel train_change_classifier(const std::vector<ChangeRecord>& records,
                                            const Hyperparams& hp, bool use_smote,
                                            int threads = 1) {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (const auto& rec : records) {
        if (!rec.labeled()) continue;
        features.push_back(rec.concat_features());
        labels.push_back(static_cast<int>(change_detail::class_index(rec.delta_class)));
    }
    if (features.empty()) throw data_error("train_change_classifier: no labeled records");

    if (use_smote) {
        std::array<std::vector<std::vector<double>>, 3> by_class;
        for (std::size_t i = 0; i < features.size(); ++i)
            by_class[static_cast<std::size_t>(labels[i])].push_back(features[i]);
        std::size_t majority = 0;
        for (const auto& c : by_class) majority = std::max(majority, c.size());
        for (std::size_t k = 0; k < 3; ++k) {
            if (by_class[k].empty() || by_class[k].size() == majority) continue;
            auto synthetic = smote(by_class[k], 5, majority - by_class[k].size(),
                                   mix_seed(hp.seed, 1000 + k));
            for (auto& s : synthetic) {
                features.push_back(std::move(s));
                labels.push_back(static_cast<int>(k));
            }
        }
    }
    return train_classifier(features, labels, 3, hp, threads);
}

inline int predict_change_class(const BoostedModel& classifier, const ChangeRecord& rec) {
    return change_detail::class_delta(
        static_cast<std::size_t>(classifier.predict_class(rec.concat_features())));
}

// Overall accuracy + per-class recall over delta classes {-1, 0, +1}.
inline FoldMetrics evaluate_change(std::span<const int> preds, std::span<const int> truths) {
    return accuracy_report(preds, truths);
}

inline void write_change_records_jsonl(const std::vector<ChangeRecord>& records,
                                       const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json j;
        j["x"] = r.x;
        j["y"] = r.y;
        j["break_time"] = r.break_time;
        j["features_before"] = r.features_before;
        j["features_after"] = r.features_after;
        j["region_id"] = r.region_id;
        if (r.labeled()) {
            j["wf_before"] = r.wf_before;
            j["wf_after"] = r.wf_after;
            j["delta_class"] = r.delta_class;
        }
        out += j.dump() + "\n";
    }
    detail::write_file_atomic(path, out);
}

inline std::vector<ChangeRecord> read_change_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<ChangeRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        ChangeRecord r;
        r.x = j.at("x");
        r.y = j.at("y");
        r.break_time = j.at("break_time");
        r.features_before = j.at("features_before").get<std::vector<double>>();
        r.features_after = j.at("features_after").get<std::vector<double>>();
        r.region_id = j.value("region_id", 0);
        if (j.contains("delta_class")) {
            r.wf_before = j.at("wf_before");
            r.wf_after = j.at("wf_after");
            r.delta_class = j.at("delta_class");
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace hydro
