#pragma once

#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "hydro/cold.hpp"

namespace hydro {

struct MaskObs {
    double t = 0.0;
    std::uint8_t state = kClassNoData;  // 0, 1, or 255 = invalid
};

// Water frequency over [t_start, t_end): valid observations are grouped by
// UTC calendar year, averaged within each year, then averaged across years
// with equal weight. `pooled` switches to a plain mean over all valid
// observations (sensitivity-check mode).
inline double water_frequency(const std::vector<MaskObs>& mask_obs, double t_start, double t_end,
                              bool pooled = false) {
    std::map<int, std::pair<int, int>> per_year;  // year -> (water, total)
    int water = 0, total = 0;
    for (const auto& ob : mask_obs) {
        if (ob.t < t_start || ob.t >= t_end) continue;
        if (ob.state != 0 && ob.state != 1) continue;
        auto& [w, n] = per_year[year_of_days(ob.t)];
        w += ob.state;
        ++n;
        water += ob.state;
        ++total;
    }
    if (total == 0) throw data_error("water_frequency: no valid observations in window");
    if (pooled) return static_cast<double>(water) / total;
    double sum = 0.0;
    for (const auto& [year, wn] : per_year) sum += static_cast<double>(wn.first) / wn.second;
    return sum / static_cast<double>(per_year.size());
}

// WF > 0.25 is water; ties classify as non-water.
inline int binarize_wf(double wf) {
    if (wf < 0.0 || wf > 1.0) throw data_error("binarize_wf: wf out of [0,1]");
    return wf > 0.25 ? 1 : 0;
}

struct LabeledSample {
    std::vector<double> features;  // 56
    double wf = 0.0;
    int region_id = 0;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    int seg_idx = 0;
    bool in_training_timeframe = false;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<int> region_ids;  // distinct, ascending

    void refresh_regions() {
        std::set<int> ids;
        for (const auto& s : samples) ids.insert(s.region_id);
        region_ids.assign(ids.begin(), ids.end());
    }
};

struct BuildReport {
    std::size_t labeled = 0;
    std::size_t skipped_no_obs = 0;
};

// Pairs each segment's 56-dim features with its WF label computed from the
// per-scene water masks. Segments with no valid mask observation in their
// window are skipped and counted.
inline Dataset build_dataset(const std::vector<PixelSegments>& pixels,
                             const std::vector<double>& mask_times,
                             const std::vector<ClassGrid>& masks, int region_id,
                             double train_t0, double train_t1, BuildReport* report = nullptr,
                             bool pooled = false) {
    if (mask_times.size() != masks.size()) throw data_error("build_dataset: mask count mismatch");
    Dataset ds;
    BuildReport rep;
    for (const auto& px : pixels) {
        std::vector<MaskObs> obs;
        obs.reserve(mask_times.size());
        for (std::size_t s = 0; s < masks.size(); ++s)
            obs.push_back({mask_times[s], masks[s].at(px.x, px.y)});
        for (std::size_t k = 0; k < px.segments.size(); ++k) {
            const Segment& seg = px.segments[k];
            LabeledSample sample;
            try {
                sample.wf = water_frequency(obs, seg.t_start, seg.t_end, pooled);
            } catch (const data_error&) {
                ++rep.skipped_no_obs;
                continue;
            }
            sample.features = seg.features();
            sample.region_id = region_id;
            sample.x = px.x;
            sample.y = px.y;
            sample.seg_idx = static_cast<int>(k);
            sample.in_training_timeframe = seg.t_start < train_t1 && seg.t_end > train_t0;
            ds.samples.push_back(std::move(sample));
            ++rep.labeled;
        }
    }
    ds.refresh_regions();
    if (report) *report = rep;
    return ds;
}

inline void write_dataset_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    std::string out;
    for (const auto& s : ds.samples) {
        nlohmann::json j;
        j["features"] = s.features;
        j["wf"] = s.wf;
        j["region_id"] = s.region_id;
        j["x"] = s.x;
        j["y"] = s.y;
        j["seg_idx"] = s.seg_idx;
        j["in_train"] = s.in_training_timeframe;
        out += j.dump() + "\n";
    }
    detail::write_file_atomic(path, out);
}

inline Dataset read_dataset_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    Dataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        LabeledSample s;
        s.features = j.at("features").get<std::vector<double>>();
        s.wf = j.at("wf");
        s.region_id = j.at("region_id");
        s.x = j.at("x");
        s.y = j.at("y");
        s.seg_idx = j.at("seg_idx");
        s.in_training_timeframe = j.at("in_train");
        ds.samples.push_back(std::move(s));
    }
    ds.refresh_regions();
    return ds;
}

}  // namespace hydro
