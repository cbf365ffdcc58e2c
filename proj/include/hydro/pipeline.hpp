#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydro/change.hpp"
#include "hydro/cold.hpp"
#include "hydro/gbt.hpp"
#include "hydro/labeling.hpp"
#include "hydro/metrics.hpp"
#include "hydro/spectral.hpp"
#include "hydro/synth.hpp"

namespace hydro {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Configuration

struct Thresholds {
    double mndwi = 0.0;      // water mask threshold on the index
    double water_wf = 0.25;  // WF above this is "water body"
    double delta_wf = 0.25;  // |dWF| above this is a change

    void validate() const {
        if (mndwi <= -1.0 || mndwi >= 1.0) throw config_error("thresholds: mndwi out of (-1,1)");
        if (water_wf < 0.0 || water_wf > 1.0) throw config_error("thresholds: water_wf out of [0,1]");
        if (delta_wf < 0.0 || delta_wf > 1.0) throw config_error("thresholds: delta_wf out of [0,1]");
    }
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    std::vector<Scenario> scenarios;  // one per region
    ColdConfig cold;
    Hyperparams hp;
    Thresholds thresholds;
    double train_t0 = 0.0, train_t1 = 0.0;  // 0/0 = span of all scenarios
    bool pooled_wf = false;
    bool use_smote = true;
    int map_region = 0;       // scenario index rendered by map/render
    int region_holdout = -1;  // region id excluded from final model fits; -1 = none

    void validate() const {
        if (scenarios.empty()) throw config_error("config: at least one scenario required");
        std::set<int> ids;
        for (const auto& sc : scenarios) {
            sc.validate();
            if (!ids.insert(sc.region_id).second)
                throw config_error("config: duplicate region_id " + std::to_string(sc.region_id));
        }
        if (threads < 1) throw config_error("config: threads must be >= 1");
        cold.validate();
        thresholds.validate();
        if (hp.n_rounds < 1 || hp.max_depth < 1 || hp.learning_rate <= 0.0 || hp.l2 < 0.0 ||
            hp.min_samples_leaf < 1)
            throw config_error("config: invalid hyperparameters");
        if (train_t0 != 0.0 || train_t1 != 0.0) {
            if (!(train_t0 < train_t1)) throw config_error("config: training_window t0 must be < t1");
        }
        if (map_region < 0 || map_region >= static_cast<int>(scenarios.size()))
            throw config_error("config: map_region out of range");
    }

    // Training window, defaulting to the union of scenario time spans.
    std::pair<double, double> training_window() const {
        if (train_t0 != 0.0 || train_t1 != 0.0) return {train_t0, train_t1};
        double lo = scenarios.front().t0, hi = scenarios.front().t1;
        for (const auto& sc : scenarios) {
            lo = std::min(lo, sc.t0);
            hi = std::max(hi, sc.t1);
        }
        return {lo, hi + 1e-9};
    }

    // Scenario with generator seed derived from the run seed, so --seed
    // reshuffles the synthetic data deterministically.
    Scenario effective_scenario(std::size_t idx) const {
        Scenario sc = scenarios[idx];
        sc.seed = mix_seed(seed, sc.seed + idx);
        return sc;
    }

    Hyperparams effective_hp() const {
        Hyperparams h = hp;
        h.seed = seed;
        return h;
    }
};

inline void to_json(nlohmann::json& j, const ColdConfig& c) {
    j = {{"lambda", c.lambda},
         {"min_obs", c.min_obs},
         {"min_span_days", c.min_span_days},
         {"conse", c.conse},
         {"chi2_threshold", c.chi2_threshold},
         {"test_bands", c.test_bands}};
}

inline void from_json(const nlohmann::json& j, ColdConfig& c) {
    ColdConfig d;
    c.lambda = j.value("lambda", d.lambda);
    c.min_obs = j.value("min_obs", d.min_obs);
    c.min_span_days = j.value("min_span_days", d.min_span_days);
    c.conse = j.value("conse", d.conse);
    c.chi2_threshold = j.value("chi2_threshold", d.chi2_threshold);
    c.test_bands = j.value("test_bands", d.test_bands);
}

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
    j = {{"n_rounds", h.n_rounds},
         {"max_depth", h.max_depth},
         {"learning_rate", h.learning_rate},
         {"min_samples_leaf", h.min_samples_leaf},
         {"l2", h.l2}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& h) {
    Hyperparams d;
    h.n_rounds = j.value("n_rounds", d.n_rounds);
    h.max_depth = j.value("max_depth", d.max_depth);
    h.learning_rate = j.value("learning_rate", d.learning_rate);
    h.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
    h.l2 = j.value("l2", d.l2);
}

inline void to_json(nlohmann::json& j, const Thresholds& t) {
    j = {{"mndwi", t.mndwi}, {"water_wf", t.water_wf}, {"delta_wf", t.delta_wf}};
}

inline void from_json(const nlohmann::json& j, Thresholds& t) {
    Thresholds d;
    t.mndwi = j.value("mndwi", d.mndwi);
    t.water_wf = j.value("water_wf", d.water_wf);
    t.delta_wf = j.value("delta_wf", d.delta_wf);
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
    j = {{"seed", c.seed},
         {"threads", c.threads},
         {"out_dir", c.out_dir},
         {"scenarios", c.scenarios},
         {"cold", c.cold},
         {"hyperparameters", c.hp},
         {"thresholds", c.thresholds},
         {"training_window", {c.train_t0, c.train_t1}},
         {"pooled_wf", c.pooled_wf},
         {"use_smote", c.use_smote},
         {"map_region", c.map_region},
         {"region_holdout", c.region_holdout}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
    PipelineConfig d;
    c.seed = j.value("seed", d.seed);
    c.threads = j.value("threads", d.threads);
    c.out_dir = j.value("out_dir", d.out_dir);
    c.scenarios = j.value("scenarios", std::vector<Scenario>{});
    c.cold = j.value("cold", d.cold);
    c.hp = j.value("hyperparameters", d.hp);
    c.thresholds = j.value("thresholds", d.thresholds);
    if (j.contains("training_window")) {
        const auto& w = j.at("training_window");
        if (!w.is_array() || w.size() != 2) throw config_error("config: training_window must be [t0,t1]");
        c.train_t0 = w[0];
        c.train_t1 = w[1];
    }
    c.pooled_wf = j.value("pooled_wf", d.pooled_wf);
    c.use_smote = j.value("use_smote", d.use_smote);
    c.map_region = j.value("map_region", d.map_region);
    c.region_holdout = j.value("region_holdout", d.region_holdout);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse: " + std::string(e.what()));
    }
    PipelineConfig cfg;
    try {
        cfg = j.get<PipelineConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config fields: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

// Canonical form behind config hashes and report echoes: execution-only
// parameters (worker count, artifact root) are excluded so reruns of the
// same experiment are byte-identical wherever and however they execute.
inline nlohmann::json canonical_json(const PipelineConfig& cfg) {
    nlohmann::json j(cfg);
    j.erase("threads");
    j.erase("out_dir");
    return j;
}

inline std::uint64_t config_hash(const PipelineConfig& cfg) {
    return fnv1a64(canonical_json(cfg).dump());
}

// ---------------------------------------------------------------------------
// Artifact layout under out_dir

namespace fs = std::filesystem;

struct Layout {
    fs::path root;

    fs::path region_dir(std::size_t i) const { return root / ("region" + std::to_string(i)); }
    fs::path stack_manifest(std::size_t i) const { return region_dir(i) / "stack" / "manifest.json"; }
    fs::path truth(std::size_t i) const { return region_dir(i) / "truth.json"; }
    fs::path mndwi_dir(std::size_t i) const { return region_dir(i) / "mndwi"; }
    fs::path mask_dir(std::size_t i) const { return region_dir(i) / "masks"; }
    fs::path scene_grid(const fs::path& dir, std::size_t s) const {
        return dir / ("s" + std::to_string(s) + ".hgrd");
    }
    fs::path segments(std::size_t i) const { return region_dir(i) / "segments.jsonl"; }
    fs::path dataset(std::size_t i) const { return region_dir(i) / "dataset.jsonl"; }
    fs::path merged_dataset() const { return root / "dataset.jsonl"; }
    fs::path changes(std::size_t i) const { return region_dir(i) / "changes.jsonl"; }
    fs::path merged_changes() const { return root / "changes.jsonl"; }

    fs::path models_dir() const { return root / "models"; }
    fs::path wf_regressor() const { return models_dir() / "wf_regressor.json"; }
    fs::path wf_classifier() const { return models_dir() / "wf_classifier.json"; }
    fs::path change_classifier() const { return models_dir() / "change_classifier.json"; }

    fs::path reports_dir() const { return root / "reports"; }
    fs::path maps_dir() const { return root / "maps"; }
    fs::path wf_grid(std::size_t i) const {
        return maps_dir() / ("wf_pred_region" + std::to_string(i) + ".hgrd");
    }
    fs::path water_classes(std::size_t i) const {
        return maps_dir() / ("water_classes_region" + std::to_string(i) + ".hgrd");
    }
    fs::path water_map(std::size_t i) const {
        return maps_dir() / ("water_map_region" + std::to_string(i) + ".ppm");
    }
    fs::path change_classes(std::size_t i) const {
        return maps_dir() / ("change_classes_region" + std::to_string(i) + ".hgrd");
    }
    fs::path change_map(std::size_t i) const {
        return maps_dir() / ("change_map_region" + std::to_string(i) + ".ppm");
    }
    fs::path manifest(const std::string& stage) const {
        return root / "manifests" / (stage + ".json");
    }
};

// Water map legend: water/land split by whether the pixel's mapped segment
// overlaps the training timeframe; out-of-timeframe classes render lighter.
inline const Palette& water_palette() {
    static const Palette p = {{0, {92, 64, 51}},      // land, within timeframe
                              {1, {8, 48, 107}},      // water, within timeframe
                              {2, {181, 149, 110}},   // land, beyond timeframe
                              {3, {107, 174, 214}}};  // water, beyond timeframe
    return p;
}

inline const Palette& change_palette() {
    static const Palette p = {{0, {146, 60, 20}},    // WF decrease
                              {1, {128, 128, 128}},  // unchanged
                              {2, {33, 113, 181}}};  // WF increase
    return p;
}

// Run manifest: which stage ran, with what config/seed, over which inputs.
// No wall-clock fields, so reruns are byte-identical.
inline void write_run_manifest(const PipelineConfig& cfg, const Layout& lay,
                               const std::string& stage, const std::vector<fs::path>& inputs,
                               const std::vector<fs::path>& outputs) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    nlohmann::json j;
    j["stage"] = stage;
    j["version"] = kVersion;
    j["seed"] = cfg.seed;
    j["config_hash"] = hash;
    j["inputs"] = nlohmann::json::object();
    for (const auto& p : inputs) {
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(detail::read_file(p))));
        j["inputs"][fs::relative(p, lay.root).generic_string()] = digest;
    }
    j["outputs"] = nlohmann::json::array();
    for (const auto& p : outputs) j["outputs"].push_back(fs::relative(p, lay.root).generic_string());
    fs::create_directories(lay.manifest(stage).parent_path());
    detail::write_file_atomic(lay.manifest(stage), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Stages. Each reads only its upstream artifacts, so any stage can be rerun
// in isolation and reproduce its outputs byte-identically.

inline void stage_synth(const PipelineConfig& cfg, const Layout& lay) {
    std::vector<fs::path> outputs;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        const auto [stack, truth] = generate(cfg.effective_scenario(i));
        fs::create_directories(lay.region_dir(i));
        outputs.push_back(write_stack(stack, lay.stack_manifest(i).parent_path()));
        write_truth(truth, lay.truth(i));
        outputs.push_back(lay.truth(i));
    }
    write_run_manifest(cfg, lay, "synth", {}, outputs);
}

inline void stage_mndwi(const PipelineConfig& cfg, const Layout& lay) {
    std::vector<fs::path> inputs, outputs;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        const SceneStack stack = read_stack(lay.stack_manifest(i));
        inputs.push_back(lay.stack_manifest(i));
        fs::create_directories(lay.mndwi_dir(i));
        for (std::size_t s = 0; s < stack.n_scenes(); ++s) {
            const Grid green = apply_qa(stack.bands[s][kGreen], stack.qa[s]);
            const Grid swir1 = apply_qa(stack.bands[s][kSwir1], stack.qa[s]);
            const Grid mndwi = compute_mndwi(green, swir1);
            const fs::path out = lay.scene_grid(lay.mndwi_dir(i), s);
            write_grid(mndwi, out);
            outputs.push_back(out);
        }
    }
    write_run_manifest(cfg, lay, "mndwi", inputs, outputs);
}

inline void stage_mask(const PipelineConfig& cfg, const Layout& lay) {
    std::vector<fs::path> inputs, outputs;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        const SceneStack stack = read_stack(lay.stack_manifest(i));
        fs::create_directories(lay.mask_dir(i));
        for (std::size_t s = 0; s < stack.n_scenes(); ++s) {
            const fs::path in = lay.scene_grid(lay.mndwi_dir(i), s);
            if (!fs::exists(in)) throw data_error("mask: missing upstream " + in.string());
            inputs.push_back(in);
            const ClassGrid mask = water_mask(read_grid(in), cfg.thresholds.mndwi);
            const fs::path out = lay.scene_grid(lay.mask_dir(i), s);
            write_grid(mask, out);
            outputs.push_back(out);
        }
    }
    write_run_manifest(cfg, lay, "mask", inputs, outputs);
}

inline std::vector<ClassGrid> read_masks(const Layout& lay, std::size_t region,
                                         std::size_t n_scenes) {
    std::vector<ClassGrid> masks;
    masks.reserve(n_scenes);
    for (std::size_t s = 0; s < n_scenes; ++s) {
        const fs::path p = lay.scene_grid(lay.mask_dir(region), s);
        if (!fs::exists(p)) throw data_error("missing upstream mask " + p.string());
        masks.push_back(read_class_grid(p));
    }
    return masks;
}

inline void stage_segment(const PipelineConfig& cfg, const Layout& lay) {
    std::vector<fs::path> inputs, outputs;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        const SceneStack stack = read_stack(lay.stack_manifest(i));
        inputs.push_back(lay.stack_manifest(i));
        const auto masks = read_masks(lay, i, stack.n_scenes());
        const auto pixels = segment_stack(stack, cfg.cold, cfg.threads, &masks);
        write_segments_jsonl(pixels, lay.segments(i));
        outputs.push_back(lay.segments(i));
    }
    write_run_manifest(cfg, lay, "segment", inputs, outputs);
}

inline void stage_label(const PipelineConfig& cfg, const Layout& lay) {
    const auto [t0, t1] = cfg.training_window();
    std::vector<fs::path> inputs, outputs;
    Dataset merged;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        if (!fs::exists(lay.segments(i)))
            throw data_error("label: missing upstream " + lay.segments(i).string());
        inputs.push_back(lay.segments(i));
        const SceneStack stack = read_stack(lay.stack_manifest(i));
        const auto pixels = read_segments_jsonl(lay.segments(i));
        const auto masks = read_masks(lay, i, stack.n_scenes());
        const Dataset ds = build_dataset(pixels, stack.times, masks, cfg.scenarios[i].region_id,
                                         t0, t1, nullptr, cfg.pooled_wf);
        write_dataset_jsonl(ds, lay.dataset(i));
        outputs.push_back(lay.dataset(i));
        merged.samples.insert(merged.samples.end(), ds.samples.begin(), ds.samples.end());
    }
    merged.refresh_regions();
    write_dataset_jsonl(merged, lay.merged_dataset());
    outputs.push_back(lay.merged_dataset());
    write_run_manifest(cfg, lay, "label", inputs, outputs);
}

// ---------------------------------------------------------------------------
// Cross-validation reports shared by the train/change stages and the test
// suite.

struct WfCvResult {
    MetricsReport nmse;        // overall = per-fold NMSE
    MetricsReport reg_cls;     // regression predictions thresholded at water_wf
    MetricsReport direct_cls;  // classifier trained on binarized labels
};

inline int binarize(double wf, double threshold) { return wf > threshold ? 1 : 0; }

inline WfCvResult wf_cross_validation(const Dataset& ds, const Hyperparams& hp,
                                      double water_threshold, int threads) {
    if (ds.region_ids.size() < 2) throw data_error("wf cv: need at least 2 regions");
    WfCvResult res;
    std::map<int, std::vector<std::size_t>> by_region;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        by_region[ds.samples[i].region_id].push_back(i);

    for (const auto& [region, test_idx] : by_region) {
        std::vector<std::vector<double>> train_x;
        std::vector<double> train_y;
        std::vector<int> train_cls;
        for (const auto& [r2, idx2] : by_region) {
            if (r2 == region) continue;
            for (std::size_t k : idx2) {
                train_x.push_back(ds.samples[k].features);
                train_y.push_back(ds.samples[k].wf);
                train_cls.push_back(binarize(ds.samples[k].wf, water_threshold));
            }
        }
        const BoostedModel reg = train_regressor(train_x, train_y, hp, threads);
        const BoostedModel cls = train_classifier(train_x, train_cls, 2, hp, threads);

        std::vector<double> pred_wf, truth_wf;
        std::vector<int> pred_reg_cls, pred_dir_cls, truth_cls;
        for (std::size_t k : test_idx) {
            const auto& s = ds.samples[k];
            const double p = reg.predict_wf(s.features);
            pred_wf.push_back(p);
            truth_wf.push_back(s.wf);
            pred_reg_cls.push_back(binarize(p, water_threshold));
            pred_dir_cls.push_back(cls.predict_class(s.features));
            truth_cls.push_back(binarize(s.wf, water_threshold));
        }

        res.nmse.fold_regions.push_back(region);
        res.nmse.overall.values.push_back(nmse(pred_wf, truth_wf));

        const auto accumulate = [region = region](MetricsReport& rep, const FoldMetrics& fm) {
            rep.fold_regions.push_back(region);
            rep.overall.values.push_back(fm.overall);
            for (const auto& [c, r] : fm.recall) rep.per_class[c].values.push_back(r);
            for (const auto& [t, row] : fm.confusion)
                for (const auto& [p, n] : row) rep.confusion[t][p] += n;
        };
        accumulate(res.reg_cls, accuracy_report(pred_reg_cls, truth_cls));
        accumulate(res.direct_cls, accuracy_report(pred_dir_cls, truth_cls));
    }

    const double reg_lo = res.reg_cls.overall.mean() - res.reg_cls.overall.ci_half_width();
    const double reg_hi = res.reg_cls.overall.mean() + res.reg_cls.overall.ci_half_width();
    const double dir_lo = res.direct_cls.overall.mean() - res.direct_cls.overall.ci_half_width();
    const double dir_hi = res.direct_cls.overall.mean() + res.direct_cls.overall.ci_half_width();
    const bool overlap = reg_lo <= dir_hi && dir_lo <= reg_hi;
    const std::string note = std::string("regression vs classification overall-accuracy CIs ") +
                             (overlap ? "overlap" : "do not overlap");
    res.reg_cls.notes.push_back(note);
    res.direct_cls.notes.push_back(note);
    return res;
}

struct ChangeCvResult {
    MetricsReport regression_path;  // WF regressor on each side, delta thresholded
    MetricsReport classifier_path;  // 3-class model on concatenated features
};

// Leave-one-region-out over labeled break records. Per fold, both the WF
// regressor (trained on the stable-segment dataset) and the change
// classifier see only the training regions.
inline ChangeCvResult change_cross_validation(const std::vector<ChangeRecord>& records,
                                              const Dataset& ds, const Hyperparams& hp,
                                              double delta_threshold, bool use_smote,
                                              int threads) {
    std::map<int, std::vector<std::size_t>> rec_by_region;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].labeled()) rec_by_region[records[i].region_id].push_back(i);
    if (rec_by_region.size() < 2) throw data_error("change cv: need labeled records in >= 2 regions");

    ChangeCvResult res;
    for (const auto& [region, test_idx] : rec_by_region) {
        std::vector<std::vector<double>> train_x;
        std::vector<double> train_y;
        for (const auto& s : ds.samples) {
            if (s.region_id == region) continue;
            train_x.push_back(s.features);
            train_y.push_back(s.wf);
        }
        const BoostedModel reg = train_regressor(train_x, train_y, hp, threads);

        std::vector<ChangeRecord> train_recs;
        for (const auto& [r2, idx2] : rec_by_region) {
            if (r2 == region) continue;
            for (std::size_t k : idx2) train_recs.push_back(records[k]);
        }
        const BoostedModel cls = train_change_classifier(train_recs, hp, use_smote, threads);

        std::vector<int> pred_reg, pred_cls, truth;
        for (std::size_t k : test_idx) {
            const auto& r = records[k];
            pred_reg.push_back(change_via_regression(reg, r, delta_threshold));
            pred_cls.push_back(predict_change_class(cls, r));
            truth.push_back(r.delta_class);
        }

        const auto accumulate = [region = region](MetricsReport& rep, const FoldMetrics& fm) {
            rep.fold_regions.push_back(region);
            rep.overall.values.push_back(fm.overall);
            for (const auto& [c, r] : fm.recall) rep.per_class[c].values.push_back(r);
            for (const auto& [t, row] : fm.confusion)
                for (const auto& [p, n] : row) rep.confusion[t][p] += n;
        };
        accumulate(res.regression_path, accuracy_report(pred_reg, truth));
        accumulate(res.classifier_path, accuracy_report(pred_cls, truth));
    }
    return res;
}

// Three-row report: overall accuracy plus the recall of each WF class.
inline std::string wf_table(const std::string& title, const MetricsReport& rep,
                            double threshold) {
    char lo[48], hi[48];
    std::snprintf(lo, sizeof lo, "WF <= %.2f", threshold);
    std::snprintf(hi, sizeof hi, "WF > %.2f", threshold);
    std::vector<std::pair<std::string, FoldStat>> rows = {{"Overall accuracy", rep.overall}};
    if (auto it = rep.per_class.find(0); it != rep.per_class.end()) rows.push_back({lo, it->second});
    if (auto it = rep.per_class.find(1); it != rep.per_class.end()) rows.push_back({hi, it->second});
    return render_table(title, rows);
}

// Four-row layout for change: overall plus recall of each delta class.
inline std::string change_table(const std::string& title, const MetricsReport& rep,
                                double threshold) {
    char mid[64], dn[48], up[48];
    std::snprintf(mid, sizeof mid, "-%.2f <= dWF <= %.2f", threshold, threshold);
    std::snprintf(dn, sizeof dn, "dWF < -%.2f", threshold);
    std::snprintf(up, sizeof up, "dWF > %.2f", threshold);
    std::vector<std::pair<std::string, FoldStat>> rows = {{"Overall accuracy", rep.overall}};
    if (auto it = rep.per_class.find(0); it != rep.per_class.end()) rows.push_back({mid, it->second});
    if (auto it = rep.per_class.find(-1); it != rep.per_class.end()) rows.push_back({dn, it->second});
    if (auto it = rep.per_class.find(1); it != rep.per_class.end()) rows.push_back({up, it->second});
    return render_table(title, rows);
}

// ---------------------------------------------------------------------------

inline void stage_train(const PipelineConfig& cfg, const Layout& lay) {
    if (!fs::exists(lay.merged_dataset()))
        throw data_error("train: missing upstream " + lay.merged_dataset().string());
    const Dataset ds = read_dataset_jsonl(lay.merged_dataset());
    const Hyperparams hp = cfg.effective_hp();

    const WfCvResult cv = wf_cross_validation(ds, hp, cfg.thresholds.water_wf, cfg.threads);

    nlohmann::json rep;
    rep["config"] = canonical_json(cfg);
    rep["nmse"] = cv.nmse.to_json();
    rep["regression_thresholded"] = cv.reg_cls.to_json();
    rep["direct_classifier"] = cv.direct_cls.to_json();
    fs::create_directories(lay.reports_dir());
    detail::write_file_atomic(lay.reports_dir() / "wf_cv.json", rep.dump(2) + "\n");

    std::string txt;
    txt += "Water-frequency regression (leave-one-region-out)\n";
    txt += "  NMSE  " + format_pm(cv.nmse.overall.mean(), cv.nmse.overall.ci_half_width()) + "\n\n";
    txt += wf_table("Water-body classification via thresholded regression", cv.reg_cls,
                    cfg.thresholds.water_wf);
    txt += "\n";
    txt += wf_table("Water-body classification via direct classifier", cv.direct_cls,
                    cfg.thresholds.water_wf);
    txt += "\n" + cv.reg_cls.notes.front() + "\n";
    detail::write_file_atomic(lay.reports_dir() / "wf_cv.txt", txt);

    // Final models on everything except the optional holdout region.
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<int> y_cls;
    for (const auto& s : ds.samples) {
        if (s.region_id == cfg.region_holdout) continue;
        x.push_back(s.features);
        y.push_back(s.wf);
        y_cls.push_back(binarize(s.wf, cfg.thresholds.water_wf));
    }
    if (x.empty()) throw data_error("train: holdout excludes every sample");
    fs::create_directories(lay.models_dir());
    write_model(train_regressor(x, y, hp, cfg.threads), lay.wf_regressor());
    write_model(train_classifier(x, y_cls, 2, hp, cfg.threads), lay.wf_classifier());

    write_run_manifest(cfg, lay, "train", {lay.merged_dataset()},
                       {lay.reports_dir() / "wf_cv.json", lay.reports_dir() / "wf_cv.txt",
                        lay.wf_regressor(), lay.wf_classifier()});
}

// Predicted WF of each pixel's latest segment, plus the 4-class map grid.
inline void stage_infer(const PipelineConfig& cfg, const Layout& lay) {
    if (!fs::exists(lay.wf_regressor()))
        throw data_error("infer: missing upstream " + lay.wf_regressor().string());
    const BoostedModel reg = read_model(lay.wf_regressor());
    const auto [t0, t1] = cfg.training_window();
    std::vector<fs::path> inputs = {lay.wf_regressor()}, outputs;
    fs::create_directories(lay.maps_dir());
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        if (!fs::exists(lay.segments(i)))
            throw data_error("infer: missing upstream " + lay.segments(i).string());
        inputs.push_back(lay.segments(i));
        const auto pixels = read_segments_jsonl(lay.segments(i));
        Grid wf(cfg.scenarios[i].width, cfg.scenarios[i].height, kNoData);
        ClassGrid classes(cfg.scenarios[i].width, cfg.scenarios[i].height, kClassNoData);
        for (const auto& px : pixels) {
            if (px.segments.empty()) continue;
            const Segment& seg = px.segments.back();
            const double p = reg.predict_wf(seg.features());
            wf.at(px.x, px.y) = static_cast<float>(p);
            const bool water = binarize(p, cfg.thresholds.water_wf) == 1;
            const bool in_window = seg.t_start < t1 && seg.t_end > t0;
            classes.at(px.x, px.y) =
                static_cast<std::uint8_t>((water ? 1 : 0) + (in_window ? 0 : 2));
        }
        write_grid(wf, lay.wf_grid(i));
        write_grid(classes, lay.water_classes(i));
        outputs.push_back(lay.wf_grid(i));
        outputs.push_back(lay.water_classes(i));
    }
    write_run_manifest(cfg, lay, "infer", inputs, outputs);
}

inline void stage_map(const PipelineConfig& cfg, const Layout& lay) {
    const std::size_t i = static_cast<std::size_t>(cfg.map_region);
    if (!fs::exists(lay.water_classes(i)))
        throw data_error("map: missing upstream " + lay.water_classes(i).string());
    render_map(read_class_grid(lay.water_classes(i)), water_palette(), lay.water_map(i));
    write_run_manifest(cfg, lay, "map", {lay.water_classes(i)}, {lay.water_map(i)});
}

// Fills in wf_before / wf_after / delta_class from the mask series over the
// two segment windows around each break; records whose windows have no valid
// observation stay unlabeled.
inline void label_change_records(std::vector<ChangeRecord>& records,
                                 const std::vector<PixelSegments>& pixels,
                                 const std::vector<double>& times,
                                 const std::vector<ClassGrid>& masks, bool pooled,
                                 double delta_threshold) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, const PixelSegments*> by_pixel;
    for (const auto& px : pixels) by_pixel[{px.x, px.y}] = &px;
    for (auto& rec : records) {
        const PixelSegments& px = *by_pixel.at({rec.x, rec.y});
        for (std::size_t k = 0; k + 1 < px.segments.size(); ++k) {
            const Segment& before = px.segments[k];
            if (!before.ended_by_break || before.break_time != rec.break_time) continue;
            const Segment& after = px.segments[k + 1];
            std::vector<MaskObs> obs;
            obs.reserve(times.size());
            for (std::size_t s = 0; s < masks.size(); ++s)
                obs.push_back({times[s], masks[s].at(rec.x, rec.y)});
            try {
                rec.wf_before = water_frequency(obs, before.t_start, before.t_end, pooled);
                rec.wf_after = water_frequency(obs, after.t_start, after.t_end, pooled);
                rec.delta_class = classify_delta(rec.wf_before, rec.wf_after, delta_threshold);
            } catch (const data_error&) {
                rec.wf_before = rec.wf_after = -1.0;  // unlabeled
            }
            break;
        }
    }
}

inline void stage_change(const PipelineConfig& cfg, const Layout& lay) {
    std::vector<fs::path> inputs, outputs;
    std::vector<ChangeRecord> merged;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        if (!fs::exists(lay.segments(i)))
            throw data_error("change: missing upstream " + lay.segments(i).string());
        inputs.push_back(lay.segments(i));
        const SceneStack stack = read_stack(lay.stack_manifest(i));
        const auto pixels = read_segments_jsonl(lay.segments(i));
        const auto masks = read_masks(lay, i, stack.n_scenes());
        auto records = extract_break_pairs(pixels, cfg.scenarios[i].region_id);
        label_change_records(records, pixels, stack.times, masks, cfg.pooled_wf,
                             cfg.thresholds.delta_wf);
        write_change_records_jsonl(records, lay.changes(i));
        outputs.push_back(lay.changes(i));
        merged.insert(merged.end(), records.begin(), records.end());
    }
    write_change_records_jsonl(merged, lay.merged_changes());
    outputs.push_back(lay.merged_changes());

    // Cross-validated reports for both paths, then a final classifier and
    // per-region change maps from the regression path.
    if (!fs::exists(lay.merged_dataset()))
        throw data_error("change: missing upstream " + lay.merged_dataset().string());
    const Dataset ds = read_dataset_jsonl(lay.merged_dataset());
    const Hyperparams hp = cfg.effective_hp();
    const ChangeCvResult cv = change_cross_validation(merged, ds, hp, cfg.thresholds.delta_wf,
                                                      cfg.use_smote, cfg.threads);

    nlohmann::json rep;
    rep["config"] = canonical_json(cfg);
    rep["regression_path"] = cv.regression_path.to_json();
    rep["classifier_path"] = cv.classifier_path.to_json();
    fs::create_directories(lay.reports_dir());
    detail::write_file_atomic(lay.reports_dir() / "change_cv.json", rep.dump(2) + "\n");

    std::string txt;
    txt += change_table("Change classification via WF-regression difference", cv.regression_path,
                        cfg.thresholds.delta_wf);
    txt += "\n";
    txt += change_table("Change classification via direct 3-class classifier", cv.classifier_path,
                        cfg.thresholds.delta_wf);
    detail::write_file_atomic(lay.reports_dir() / "change_cv.txt", txt);
    outputs.push_back(lay.reports_dir() / "change_cv.json");
    outputs.push_back(lay.reports_dir() / "change_cv.txt");

    std::vector<ChangeRecord> train_recs;
    for (const auto& r : merged)
        if (r.labeled() && r.region_id != cfg.region_holdout) train_recs.push_back(r);
    fs::create_directories(lay.models_dir());
    write_model(train_change_classifier(train_recs, hp, cfg.use_smote, cfg.threads),
                lay.change_classifier());
    outputs.push_back(lay.change_classifier());

    if (!fs::exists(lay.wf_regressor()))
        throw data_error("change: missing upstream " + lay.wf_regressor().string());
    const BoostedModel reg = read_model(lay.wf_regressor());
    inputs.push_back(lay.wf_regressor());
    fs::create_directories(lay.maps_dir());
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        ClassGrid classes(cfg.scenarios[i].width, cfg.scenarios[i].height, kClassNoData);
        for (const auto& r : merged) {
            if (r.region_id != cfg.scenarios[i].region_id) continue;
            // Records are sorted by break time per pixel: the latest wins.
            const int delta = change_via_regression(reg, r, cfg.thresholds.delta_wf);
            classes.at(r.x, r.y) = static_cast<std::uint8_t>(delta + 1);
        }
        write_grid(classes, lay.change_classes(i));
        outputs.push_back(lay.change_classes(i));
    }

    // Prediction/truth pairs for the standalone eval stage.
    std::string pairs;
    for (const auto& r : merged) {
        if (!r.labeled()) continue;
        nlohmann::json j = {{"pred", change_via_regression(reg, r, cfg.thresholds.delta_wf)},
                            {"truth", r.delta_class}};
        pairs += j.dump() + "\n";
    }
    detail::write_file_atomic(lay.reports_dir() / "change_pairs.jsonl", pairs);
    outputs.push_back(lay.reports_dir() / "change_pairs.jsonl");

    write_run_manifest(cfg, lay, "change", inputs, outputs);
}

inline void stage_render(const PipelineConfig& cfg, const Layout& lay) {
    const std::size_t i = static_cast<std::size_t>(cfg.map_region);
    if (!fs::exists(lay.change_classes(i)))
        throw data_error("render: missing upstream " + lay.change_classes(i).string());
    render_map(read_class_grid(lay.change_classes(i)), change_palette(), lay.change_map(i));
    write_run_manifest(cfg, lay, "render", {lay.change_classes(i)}, {lay.change_map(i)});
}

// Standalone scoring of a {"pred":int,"truth":int} JSONL pairs file.
inline FoldMetrics stage_eval(const PipelineConfig& cfg, const Layout& lay,
                              const fs::path& pairs_path, const fs::path& report_path) {
    std::ifstream in(pairs_path);
    if (!in) throw data_error("eval: cannot open " + pairs_path.string());
    std::vector<int> pred, truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        pred.push_back(j.at("pred"));
        truth.push_back(j.at("truth"));
    }
    const FoldMetrics fm = accuracy_report(pred, truth);
    nlohmann::json rep;
    rep["config"] = canonical_json(cfg);
    rep["overall"] = fm.overall;
    rep["recall"] = nlohmann::json::object();
    for (const auto& [c, r] : fm.recall) rep["recall"][std::to_string(c)] = r;
    rep["confusion"] = nlohmann::json::object();
    for (const auto& [t, row] : fm.confusion)
        for (const auto& [p, n] : row) rep["confusion"][std::to_string(t)][std::to_string(p)] = n;
    fs::create_directories(report_path.parent_path());
    detail::write_file_atomic(report_path, rep.dump(2) + "\n");
    write_run_manifest(cfg, lay, "eval", {pairs_path}, {report_path});
    return fm;
}

inline void run_pipeline(const PipelineConfig& cfg, const Layout& lay) {
    stage_synth(cfg, lay);
    stage_mndwi(cfg, lay);
    stage_mask(cfg, lay);
    stage_segment(cfg, lay);
    stage_label(cfg, lay);
    stage_train(cfg, lay);
    stage_infer(cfg, lay);
    stage_map(cfg, lay);
    stage_change(cfg, lay);
    stage_render(cfg, lay);
    stage_eval(cfg, lay, lay.reports_dir() / "change_pairs.jsonl",
               lay.reports_dir() / "eval_change.json");
}

}  // namespace hydro
