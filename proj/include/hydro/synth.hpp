#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydro/labeling.hpp"
#include "hydro/rng.hpp"
#include "hydro/stack.hpp"

namespace hydro {

enum class LakeDynamics { kStable, kShrink, kGrow, kSeasonal };

// Elliptical lake. Shrink/grow scale the radii by `factor` at t_break;
// seasonal modulates the radii sinusoidally with a 365.25-day period.
struct LakeSpec {
    double cx = 0.0, cy = 0.0;   // pixel coordinates of the center
    double rx = 4.0, ry = 4.0;   // radii in pixels
    LakeDynamics dynamics = LakeDynamics::kStable;
    double t_break = 0.0;        // shrink/grow only
    double factor = 0.5;         // radius scale after the break
    double amplitude = 0.0;      // seasonal radius modulation, fraction of radius
};

// Land-cover disturbance that shifts the land spectra (nir/red/swir2) inside
// a pixel box after t_break without touching green/swir1, so water masks are
// unaffected: produces breakpoints whose WF delta is zero.
struct DisturbanceSpec {
    std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive box
    double t_break = 0.0;
};

struct Scenario {
    std::uint32_t width = 32, height = 32;
    int region_id = 0;
    TileId tile;
    std::vector<LakeSpec> lakes;
    std::vector<DisturbanceSpec> disturbances;
    double noise_sigma = 0.01;   // reflectance
    double cloud_prob = 0.0;
    double cadence_days = 30.4375;  // monthly
    double t0 = 5113.0;          // 1984-01-01
    double t1 = 8035.0;          // ~1992-01-01
    double band_seasonal_amplitude = 0.02;  // land nir annual swing
    std::uint64_t seed = 1;

    void validate() const {
        if (width == 0 || height == 0) throw config_error("scenario: degenerate grid");
        if (cloud_prob < 0.0 || cloud_prob > 1.0) throw config_error("scenario: cloud_prob out of [0,1]");
        if (!(t0 < t1)) throw config_error("scenario: t0 must be < t1");
        if (cadence_days <= 0.0) throw config_error("scenario: cadence must be positive");
        if (noise_sigma < 0.0) throw config_error("scenario: negative noise sigma");
        for (const auto& l : lakes)
            if (l.rx <= 0.0 || l.ry <= 0.0) throw config_error("scenario: lake radii must be positive");
    }
};

// Reflectance archetypes; green/swir1 chosen so MNDWI signs are unambiguous
// at noise sigma <= 0.02 (water +0.54, land -0.33).
inline constexpr std::array<double, kNumBands> kWaterArchetype = {0.06, 0.10, 0.07, 0.04,
                                                                  0.03, 0.02, 0.40};
inline constexpr std::array<double, kNumBands> kLandArchetype = {0.08, 0.10, 0.12, 0.30,
                                                                 0.20, 0.15, 0.45};
// Added to the land archetype after a disturbance.
inline constexpr std::array<double, kNumBands> kDisturbShift = {0.0, 0.0, 0.06, -0.12,
                                                                0.0, 0.04, 0.02};

struct TruthBundle {
    std::vector<double> times;
    std::uint32_t width = 0, height = 0;
    std::vector<std::vector<std::uint8_t>> water;  // [scene][pixel], 0/1
    std::vector<std::vector<double>> break_times;  // [pixel], ascending

    std::uint8_t state(std::uint32_t x, std::uint32_t y, std::size_t scene) const {
        return water[scene][static_cast<std::size_t>(y) * width + x];
    }
};

namespace detail {

inline double lake_scale(const LakeSpec& lake, double t) {
    double s = 1.0;
    if ((lake.dynamics == LakeDynamics::kShrink || lake.dynamics == LakeDynamics::kGrow) &&
        t >= lake.t_break)
        s = lake.factor;
    if (lake.amplitude > 0.0)
        s *= 1.0 + lake.amplitude * std::sin(2.0 * std::numbers::pi * t / kDaysPerYear);
    return std::max(s, 1e-6);
}

inline bool in_lake(const LakeSpec& lake, std::uint32_t x, std::uint32_t y, double t) {
    const double s = lake_scale(lake, t);
    const double dx = (x + 0.5 - lake.cx) / (lake.rx * s);
    const double dy = (y + 0.5 - lake.cy) / (lake.ry * s);
    return dx * dx + dy * dy <= 1.0;
}

// Step-induced state change ignoring the seasonal modulation (annual-mean
// geometry): defines the true break set for shrink/grow lakes.
inline bool step_changes_pixel(const LakeSpec& lake, std::uint32_t x, std::uint32_t y) {
    if (lake.dynamics != LakeDynamics::kShrink && lake.dynamics != LakeDynamics::kGrow) return false;
    const double dx = (x + 0.5 - lake.cx);
    const double dy = (y + 0.5 - lake.cy);
    const auto inside = [&](double s) {
        const double ux = dx / (lake.rx * s), uy = dy / (lake.ry * s);
        return ux * ux + uy * uy <= 1.0;
    };
    return inside(1.0) != inside(lake.factor);
}

}  // namespace detail

// Deterministic scene generation: per-scene sub-stream mix_seed(seed, scene)
// drives all noise and cloud draws, so scenes may be generated in parallel
// without changing the output.
inline std::pair<SceneStack, TruthBundle> generate(const Scenario& sc) {
    sc.validate();
    SceneStack stack;
    stack.tile = sc.tile;
    for (double t = sc.t0; t <= sc.t1 + 1e-9; t += sc.cadence_days) stack.times.push_back(t);

    TruthBundle truth;
    truth.times = stack.times;
    truth.width = sc.width;
    truth.height = sc.height;
    const std::size_t npix = static_cast<std::size_t>(sc.width) * sc.height;
    truth.water.assign(stack.times.size(), std::vector<std::uint8_t>(npix, 0));
    truth.break_times.assign(npix, {});

    for (std::size_t p = 0; p < npix; ++p) {
        const auto x = static_cast<std::uint32_t>(p % sc.width);
        const auto y = static_cast<std::uint32_t>(p / sc.width);
        for (const auto& lake : sc.lakes)
            if (detail::step_changes_pixel(lake, x, y)) truth.break_times[p].push_back(lake.t_break);
        for (const auto& d : sc.disturbances)
            if (x >= d.x0 && x <= d.x1 && y >= d.y0 && y <= d.y1)
                truth.break_times[p].push_back(d.t_break);
        std::sort(truth.break_times[p].begin(), truth.break_times[p].end());
    }

    stack.bands.resize(stack.times.size());
    stack.qa.resize(stack.times.size());
    for (std::size_t s = 0; s < stack.times.size(); ++s) {
        const double t = stack.times[s];
        Rng rng(mix_seed(sc.seed, s));
        for (int b = 0; b < kNumBands; ++b) {
            stack.bands[s][b] = Grid(sc.width, sc.height);
            stack.bands[s][b].origin_y = static_cast<double>(sc.height) * 30.0;
        }
        stack.qa[s] = ClassGrid(sc.width, sc.height);
        stack.qa[s].origin_y = static_cast<double>(sc.height) * 30.0;

        for (std::size_t p = 0; p < npix; ++p) {
            const auto x = static_cast<std::uint32_t>(p % sc.width);
            const auto y = static_cast<std::uint32_t>(p / sc.width);
            bool water = false;
            for (const auto& lake : sc.lakes)
                if (detail::in_lake(lake, x, y, t)) {
                    water = true;
                    break;
                }
            truth.water[s][p] = water ? 1 : 0;

            std::array<double, kNumBands> refl = water ? kWaterArchetype : kLandArchetype;
            if (!water) {
                refl[kNir] += sc.band_seasonal_amplitude *
                              std::sin(2.0 * std::numbers::pi * t / kDaysPerYear);
                for (const auto& d : sc.disturbances)
                    if (t >= d.t_break && x >= d.x0 && x <= d.x1 && y >= d.y0 && y <= d.y1)
                        for (int b = 0; b < kNumBands; ++b) refl[b] += kDisturbShift[b];
            }
            for (int b = 0; b < kNumBands; ++b) {
                double v = refl[b];
                if (sc.noise_sigma > 0.0) v += rng.normal(0.0, sc.noise_sigma);
                stack.bands[s][b].samples[p] = static_cast<float>(v);
            }
            stack.qa[s].samples[p] = (sc.cloud_prob > 0.0 && rng.uniform() < sc.cloud_prob) ? 1 : 0;
        }
    }
    stack.validate();
    return {std::move(stack), std::move(truth)};
}

// Oracle WF: the labeling module's two-stage yearly averaging applied to the
// true (noise-free, cloud-free) water states.
inline double true_wf(const TruthBundle& truth, std::uint32_t x, std::uint32_t y, double t_start,
                      double t_end, bool pooled = false) {
    std::vector<MaskObs> obs;
    obs.reserve(truth.times.size());
    for (std::size_t s = 0; s < truth.times.size(); ++s)
        obs.push_back({truth.times[s], truth.state(x, y, s)});
    return water_frequency(obs, t_start, t_end, pooled);
}

inline void to_json(nlohmann::json& j, const LakeSpec& l) {
    static const char* names[] = {"stable", "shrink", "grow", "seasonal"};
    j = {{"cx", l.cx},       {"cy", l.cy},
         {"rx", l.rx},       {"ry", l.ry},
         {"dynamics", names[static_cast<int>(l.dynamics)]},
         {"t_break", l.t_break},
         {"factor", l.factor},
         {"amplitude", l.amplitude}};
}

inline void from_json(const nlohmann::json& j, LakeSpec& l) {
    l.cx = j.at("cx");
    l.cy = j.at("cy");
    l.rx = j.at("rx");
    l.ry = j.at("ry");
    const std::string d = j.value("dynamics", "stable");
    if (d == "stable") l.dynamics = LakeDynamics::kStable;
    else if (d == "shrink") l.dynamics = LakeDynamics::kShrink;
    else if (d == "grow") l.dynamics = LakeDynamics::kGrow;
    else if (d == "seasonal") l.dynamics = LakeDynamics::kSeasonal;
    else throw config_error("scenario: unknown lake dynamics '" + d + "'");
    l.t_break = j.value("t_break", 0.0);
    l.factor = j.value("factor", 0.5);
    l.amplitude = j.value("amplitude", 0.0);
}

inline void to_json(nlohmann::json& j, const DisturbanceSpec& d) {
    j = {{"x0", d.x0}, {"y0", d.y0}, {"x1", d.x1}, {"y1", d.y1}, {"t_break", d.t_break}};
}

inline void from_json(const nlohmann::json& j, DisturbanceSpec& d) {
    d.x0 = j.at("x0");
    d.y0 = j.at("y0");
    d.x1 = j.at("x1");
    d.y1 = j.at("y1");
    d.t_break = j.at("t_break");
}

inline void to_json(nlohmann::json& j, const Scenario& sc) {
    j = {{"width", sc.width},
         {"height", sc.height},
         {"region_id", sc.region_id},
         {"tile", {{"h", sc.tile.h}, {"v", sc.tile.v}}},
         {"lakes", sc.lakes},
         {"disturbances", sc.disturbances},
         {"noise_sigma", sc.noise_sigma},
         {"cloud_prob", sc.cloud_prob},
         {"cadence_days", sc.cadence_days},
         {"t0", sc.t0},
         {"t1", sc.t1},
         {"band_seasonal_amplitude", sc.band_seasonal_amplitude},
         {"seed", sc.seed}};
}

inline void from_json(const nlohmann::json& j, Scenario& sc) {
    sc.width = j.value("width", 32u);
    sc.height = j.value("height", 32u);
    sc.region_id = j.value("region_id", 0);
    if (j.contains("tile")) {
        sc.tile.h = j["tile"].value("h", 0);
        sc.tile.v = j["tile"].value("v", 0);
    }
    sc.lakes = j.value("lakes", std::vector<LakeSpec>{});
    sc.disturbances = j.value("disturbances", std::vector<DisturbanceSpec>{});
    sc.noise_sigma = j.value("noise_sigma", 0.01);
    sc.cloud_prob = j.value("cloud_prob", 0.0);
    sc.cadence_days = j.value("cadence_days", 30.4375);
    sc.t0 = j.value("t0", 5113.0);
    sc.t1 = j.value("t1", 8035.0);
    sc.band_seasonal_amplitude = j.value("band_seasonal_amplitude", 0.02);
    sc.seed = j.value("seed", std::uint64_t{1});
}

// Truth serialization for pipeline stages that need the oracle downstream.
inline void write_truth(const TruthBundle& truth, const std::filesystem::path& path) {
    nlohmann::json j;
    j["times"] = truth.times;
    j["width"] = truth.width;
    j["height"] = truth.height;
    j["water"] = truth.water;
    j["break_times"] = truth.break_times;
    detail::write_file_atomic(path, j.dump() + "\n");
}

inline TruthBundle read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    const auto j = nlohmann::json::parse(in);
    TruthBundle t;
    t.times = j.at("times").get<std::vector<double>>();
    t.width = j.at("width");
    t.height = j.at("height");
    t.water = j.at("water").get<std::vector<std::vector<std::uint8_t>>>();
    t.break_times = j.at("break_times").get<std::vector<std::vector<double>>>();
    return t;
}

}  // namespace hydro
