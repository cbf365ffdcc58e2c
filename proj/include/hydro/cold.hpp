#pragma once

#include <array>
#include <optional>
#include <vector>

#include <json.hpp>

#include "hydro/harmonic.hpp"
#include "hydro/parallel.hpp"
#include "hydro/spectral.hpp"
#include "hydro/stack.hpp"

namespace hydro {

inline constexpr int kNumFeatures = kNumBands * kNumCoeffs;  // 56
inline constexpr double kRmseFloor = 1e-4;                   // reflectance units

struct Observation {
    double t = 0.0;
    std::array<double, kNumBands> refl{};
    bool valid = false;          // qa-clear and all bands present
    std::uint8_t water = kClassNoData;  // MNDWI mask state {0,1,255}
};

struct PixelSeries {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::vector<Observation> obs;  // sorted by t strictly increasing
};

struct Segment {
    double t_start = 0.0;
    double t_end = 0.0;
    std::array<HarmonicModel, kNumBands> models;
    int n_obs = 0;
    bool ended_by_break = false;
    double break_time = 0.0;  // meaningful iff ended_by_break

    // Band-major concatenation: band0 coeffs 0..7, band1 coeffs 0..7, ...
    std::vector<double> features() const {
        std::vector<double> f;
        f.reserve(kNumFeatures);
        for (const auto& m : models)
            for (double c : m.coeffs) f.push_back(c);
        return f;
    }
};

struct ColdConfig {
    double lambda = 0.1;          // LASSO penalty on slope + harmonics
    int min_obs = 16;
    double min_span_days = 365.0;
    int conse = 4;                // consecutive anomalies to confirm a break
    double chi2_threshold = 15.09;  // chi-square(5) upper 1% point
    std::vector<int> test_bands = {kGreen, kRed, kNir, kSwir1, kSwir2};

    void validate() const {
        if (lambda < 0.0) throw config_error("cold: lambda must be >= 0");
        if (min_obs < kNumCoeffs) throw config_error("cold: min_obs must be >= 8");
        if (conse < 1) throw config_error("cold: conse must be >= 1");
        if (test_bands.empty()) throw config_error("cold: test_bands empty");
        for (int b : test_bands)
            if (b < 0 || b >= kNumBands) throw config_error("cold: bad test band index");
    }
};

// Sum over test bands of (residual / max(rmse, floor))^2; under the fitted
// noise model this is approximately chi-square with |test_bands| dof.
inline double change_score(const Segment& seg, const Observation& ob, const ColdConfig& cfg) {
    double score = 0.0;
    for (int b : cfg.test_bands) {
        const double resid = ob.refl[b] - seg.models[b].predict(ob.t);
        const double scale = std::max(seg.models[b].rmse, kRmseFloor);
        const double z = resid / scale;
        score += z * z;
    }
    return score;
}

namespace detail {

inline void fit_segment_models(Segment& seg, const std::vector<const Observation*>& window,
                               const ColdConfig& cfg) {
    std::vector<double> ts(window.size()), ys(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) ts[i] = window[i]->t;
    for (int b = 0; b < kNumBands; ++b) {
        for (std::size_t i = 0; i < window.size(); ++i) ys[i] = window[i]->refl[b];
        seg.models[b] = fit_harmonic(ts, ys, cfg.lambda);
    }
}

}  // namespace detail

// Sequential segmentation: fit on the first min_obs valid observations
// spanning min_span_days, then monitor. A break is confirmed when conse
// consecutive observations all score above chi2_threshold; those anomalies
// seed the next segment and break_time is the first anomaly's time. Models
// are not refit during monitoring. A trailing window that meets both the
// min_obs and min_span requirements is emitted with ended_by_break = false.
inline std::vector<Segment> segment_series(const PixelSeries& series, const ColdConfig& cfg) {
    cfg.validate();
    std::vector<const Observation*> valid;
    valid.reserve(series.obs.size());
    for (const auto& ob : series.obs)
        if (ob.valid) valid.push_back(&ob);

    std::vector<Segment> segments;
    std::size_t pos = 0;
    while (pos < valid.size()) {
        // Initialization window: grow until both thresholds are met.
        std::size_t end = pos;
        while (end < valid.size() &&
               (static_cast<int>(end - pos + 1) < cfg.min_obs ||
                valid[end]->t - valid[pos]->t < cfg.min_span_days))
            ++end;
        if (end >= valid.size()) break;  // not enough data for another segment

        Segment seg;
        std::vector<const Observation*> window(valid.begin() + static_cast<std::ptrdiff_t>(pos),
                                               valid.begin() + static_cast<std::ptrdiff_t>(end) + 1);
        detail::fit_segment_models(seg, window, cfg);
        seg.t_start = window.front()->t;
        seg.t_end = window.back()->t;
        seg.n_obs = static_cast<int>(window.size());

        // Monitor.
        std::size_t i = end + 1;
        int run = 0;
        std::size_t first_anomaly = 0;
        bool broke = false;
        for (; i < valid.size(); ++i) {
            if (change_score(seg, *valid[i], cfg) > cfg.chi2_threshold) {
                if (run == 0) first_anomaly = i;
                if (++run >= cfg.conse) {
                    broke = true;
                    break;
                }
            } else {
                // Unconfirmed anomalies fold back into the segment.
                if (run > 0) {
                    seg.n_obs += run;
                    run = 0;
                }
                seg.t_end = valid[i]->t;
                ++seg.n_obs;
            }
        }

        if (broke) {
            seg.ended_by_break = true;
            seg.break_time = valid[first_anomaly]->t;
            segments.push_back(std::move(seg));
            pos = first_anomaly;  // anomalies belong to the next segment
        } else {
            if (run > 0) {
                seg.n_obs += run;
                seg.t_end = valid.back()->t;
            }
            segments.push_back(std::move(seg));
            break;
        }
    }
    return segments;
}

// Extracts the per-pixel series for one pixel of a stack, with QA applied and
// mask state taken from the per-scene water masks when provided.
inline PixelSeries extract_series(const SceneStack& stack, std::uint32_t x, std::uint32_t y,
                                  const std::vector<ClassGrid>* masks = nullptr) {
    PixelSeries series;
    series.x = x;
    series.y = y;
    series.obs.reserve(stack.n_scenes());
    for (std::size_t s = 0; s < stack.n_scenes(); ++s) {
        Observation ob;
        ob.t = stack.times[s];
        ob.valid = stack.qa[s].at(x, y) == 0;
        if (ob.valid) {
            for (int b = 0; b < kNumBands; ++b) {
                const float v = stack.bands[s][b].at(x, y);
                if (v == static_cast<float>(stack.bands[s][b].nodata) || !std::isfinite(v)) {
                    ob.valid = false;
                    break;
                }
                ob.refl[b] = v;
            }
        }
        if (masks) ob.water = (*masks)[s].at(x, y);
        series.obs.push_back(ob);
    }
    return series;
}

struct PixelSegments {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::vector<Segment> segments;
};

// Data-parallel map over pixels; output order is row-major regardless of
// thread count.
inline std::vector<PixelSegments> segment_stack(const SceneStack& stack, const ColdConfig& cfg,
                                                int threads,
                                                const std::vector<ClassGrid>* masks = nullptr) {
    cfg.validate();
    const std::size_t n = static_cast<std::size_t>(stack.width()) * stack.height();
    std::vector<PixelSegments> out(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto x = static_cast<std::uint32_t>(i % stack.width());
        const auto y = static_cast<std::uint32_t>(i / stack.width());
        out[i].x = x;
        out[i].y = y;
        out[i].segments = segment_series(extract_series(stack, x, y, masks), cfg);
    });
    return out;
}

// JSON-lines serialization: one object per segment.
inline nlohmann::json segment_to_json(const PixelSegments& px, const Segment& seg) {
    nlohmann::json j;
    j["x"] = px.x;
    j["y"] = px.y;
    j["t_start"] = seg.t_start;
    j["t_end"] = seg.t_end;
    j["n_obs"] = seg.n_obs;
    j["ended_by_break"] = seg.ended_by_break;
    if (seg.ended_by_break) j["break_time"] = seg.break_time;
    j["features"] = seg.features();
    std::vector<double> rmse(kNumBands);
    for (int b = 0; b < kNumBands; ++b) rmse[b] = seg.models[b].rmse;
    j["rmse"] = rmse;
    return j;
}

inline void write_segments_jsonl(const std::vector<PixelSegments>& pixels,
                                 const std::filesystem::path& path) {
    std::string out;
    for (const auto& px : pixels)
        for (const auto& seg : px.segments) out += segment_to_json(px, seg).dump() + "\n";
    detail::write_file_atomic(path, out);
}

inline std::vector<PixelSegments> read_segments_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::map<std::pair<std::uint32_t, std::uint32_t>, PixelSegments> by_pixel;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const std::uint32_t x = j.at("x"), y = j.at("y");
        auto& px = by_pixel[{y, x}];
        px.x = x;
        px.y = y;
        Segment seg;
        seg.t_start = j.at("t_start");
        seg.t_end = j.at("t_end");
        seg.n_obs = j.at("n_obs");
        seg.ended_by_break = j.at("ended_by_break");
        if (seg.ended_by_break) seg.break_time = j.at("break_time");
        const auto feats = j.at("features").get<std::vector<double>>();
        if (feats.size() != kNumFeatures) throw format_error("segments: bad feature length");
        const auto rmse = j.at("rmse").get<std::vector<double>>();
        for (int b = 0; b < kNumBands; ++b) {
            for (int c = 0; c < kNumCoeffs; ++c)
                seg.models[b].coeffs[c] = feats[static_cast<std::size_t>(b) * kNumCoeffs + c];
            seg.models[b].rmse = rmse.at(static_cast<std::size_t>(b));
        }
        px.segments.push_back(std::move(seg));
    }
    std::vector<PixelSegments> out;
    out.reserve(by_pixel.size());
    for (auto& [key, px] : by_pixel) {
        std::sort(px.segments.begin(), px.segments.end(),
                  [](const Segment& a, const Segment& b) { return a.t_start < b.t_start; });
        out.push_back(std::move(px));
    }
    return out;
}

}  // namespace hydro
