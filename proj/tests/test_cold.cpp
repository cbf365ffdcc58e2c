#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "hydro/cold.hpp"
#include "hydro/rng.hpp"
#include "hydro/synth.hpp"

using namespace hydro;

namespace {

// Monthly series with the given per-band constant value and noise.
PixelSeries constant_series(const std::array<double, kNumBands>& level, int n_months,
                            double sigma, std::uint64_t seed, double t0 = 5113.0) {
    Rng rng(seed);
    PixelSeries series;
    for (int i = 0; i < n_months; ++i) {
        Observation ob;
        ob.t = t0 + 30.4375 * i;
        ob.valid = true;
        for (int b = 0; b < kNumBands; ++b) ob.refl[b] = level[b] + rng.normal(0.0, sigma);
        series.obs.push_back(ob);
    }
    return series;
}

}  // namespace

TEST_CASE("change score is zero on an exact prediction and 1 for one rmse off") {
    ColdConfig cfg;
    Segment seg;
    for (int b = 0; b < kNumBands; ++b) {
        seg.models[b].coeffs = {0.2, 0, 0, 0, 0, 0, 0, 0};
        seg.models[b].rmse = 0.02;
    }
    Observation ob;
    ob.t = 1000.0;
    ob.valid = true;
    for (int b = 0; b < kNumBands; ++b) ob.refl[b] = 0.2;
    REQUIRE(change_score(seg, ob, cfg) == Catch::Approx(0.0).margin(1e-12));

    ob.refl[kGreen] = 0.2 + 0.02;  // exactly one rmse in one test band
    REQUIRE(change_score(seg, ob, cfg) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("change score of noise-matched observations is chi-square(5)") {
    // Monte-Carlo oracle: mean of a chi-square(5) draw is 5.
    ColdConfig cfg;
    Segment seg;
    const double sigma = 0.01;
    for (int b = 0; b < kNumBands; ++b) {
        seg.models[b].coeffs = {0.15, 0, 0, 0, 0, 0, 0, 0};
        seg.models[b].rmse = sigma;
    }
    Rng rng(99);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Observation ob;
        ob.t = 2000.0;
        ob.valid = true;
        for (int b = 0; b < kNumBands; ++b) ob.refl[b] = 0.15 + rng.normal(0.0, sigma);
        sum += change_score(seg, ob, cfg);
    }
    REQUIRE(sum / n == Catch::Approx(5.0).margin(0.2));
}

TEST_CASE("stable pixel yields exactly one segment") {
    ColdConfig cfg;
    const auto series = constant_series(kLandArchetype, 96, 0.005, 7);
    const auto segs = segment_series(series, cfg);
    REQUIRE(segs.size() == 1);
    REQUIRE_FALSE(segs[0].ended_by_break);
    REQUIRE(segs[0].n_obs == 96);
    REQUIRE(segs[0].t_start == series.obs.front().t);
    REQUIRE(segs[0].t_end == series.obs.back().t);
}

TEST_CASE("step change of 10+ rmse produces two segments with accurate break time") {
    ColdConfig cfg;
    Rng rng(17);
    PixelSeries series;
    const double t_step = 5113.0 + 30.4375 * 48;  // mid-series
    for (int i = 0; i < 96; ++i) {
        Observation ob;
        ob.t = 5113.0 + 30.4375 * i;
        ob.valid = true;
        const auto& base = ob.t < t_step ? kLandArchetype : kWaterArchetype;
        for (int b = 0; b < kNumBands; ++b) ob.refl[b] = base[b] + rng.normal(0.0, 0.005);
        series.obs.push_back(ob);
    }
    const auto segs = segment_series(series, cfg);
    REQUIRE(segs.size() == 2);
    REQUIRE(segs[0].ended_by_break);
    REQUIRE_FALSE(segs[1].ended_by_break);
    REQUIRE(std::abs(segs[0].break_time - t_step) <= cfg.conse * 30.4375);
    REQUIRE(segs[1].t_start >= segs[0].t_end);
}

TEST_CASE("too few observations yields empty list") {
    ColdConfig cfg;
    auto series = constant_series(kLandArchetype, 5, 0.0, 3);
    REQUIRE(segment_series(series, cfg).empty());
}

TEST_CASE("invalid observations are skipped") {
    ColdConfig cfg;
    auto series = constant_series(kLandArchetype, 60, 0.005, 5);
    for (std::size_t i = 0; i < series.obs.size(); i += 3) series.obs[i].valid = false;
    const auto segs = segment_series(series, cfg);
    REQUIRE(segs.size() == 1);
    REQUIRE(segs[0].n_obs == 40);
}

TEST_CASE("segments are ordered and disjoint within the series range") {
    ColdConfig cfg;
    Rng rng(29);
    PixelSeries series;
    for (int i = 0; i < 200; ++i) {
        Observation ob;
        ob.t = 5113.0 + 30.4375 * i;
        ob.valid = true;
        const int phase = i / 70;  // two breaks
        const auto& base = phase % 2 == 0 ? kLandArchetype : kWaterArchetype;
        for (int b = 0; b < kNumBands; ++b) ob.refl[b] = base[b] + rng.normal(0.0, 0.005);
        series.obs.push_back(ob);
    }
    const auto segs = segment_series(series, cfg);
    REQUIRE(segs.size() >= 2);
    for (std::size_t k = 0; k < segs.size(); ++k) {
        REQUIRE(segs[k].t_start < segs[k].t_end);
        REQUIRE(segs[k].t_start >= series.obs.front().t);
        REQUIRE(segs[k].t_end <= series.obs.back().t);
        if (k > 0) REQUIRE(segs[k].t_start >= segs[k - 1].t_end);
        REQUIRE(segs[k].n_obs >= cfg.min_obs);
        REQUIRE(segs[k].t_end - segs[k].t_start >= cfg.min_span_days);
    }
}

TEST_CASE("false-break rate on stable noisy pixels stays under 2%") {
    ColdConfig cfg;
    int with_break = 0;
    const int n_pixels = 1000;
    for (int p = 0; p < n_pixels; ++p) {
        const auto series = constant_series(kLandArchetype, 96, 0.01, 1000 + p);
        for (const auto& seg : segment_series(series, cfg))
            if (seg.ended_by_break) {
                ++with_break;
                break;
            }
    }
    REQUIRE(with_break < n_pixels * 2 / 100);
}

TEST_CASE("determinism: identical series and config give identical segments") {
    ColdConfig cfg;
    const auto series = constant_series(kLandArchetype, 96, 0.01, 55);
    const auto a = segment_series(series, cfg);
    const auto b = segment_series(series, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].t_start == b[k].t_start);
        REQUIRE(a[k].t_end == b[k].t_end);
        REQUIRE(a[k].features() == b[k].features());
    }
}

TEST_CASE("feature export layout is band-major") {
    Segment seg;
    for (int b = 0; b < kNumBands; ++b)
        for (int c = 0; c < kNumCoeffs; ++c)
            seg.models[b].coeffs[c] = b * 100.0 + c;
    const auto f = seg.features();
    REQUIRE(f.size() == kNumFeatures);
    REQUIRE(f[9] == 101.0);  // band 1 slope
    REQUIRE(f[0] == 0.0);
    REQUIRE(f[55] == 607.0);

    Segment zero;
    REQUIRE(zero.features() == std::vector<double>(kNumFeatures, 0.0));
}

TEST_CASE("features round-trip to the same predictions") {
    ColdConfig cfg;
    const auto series = constant_series(kWaterArchetype, 60, 0.01, 66);
    const auto segs = segment_series(series, cfg);
    REQUIRE(segs.size() == 1);
    const auto f = segs[0].features();
    for (double t : {5200.0, 5700.0, 6100.0}) {
        const auto row = design_row(t);
        for (int b = 0; b < kNumBands; ++b) {
            double pred = 0.0;
            for (int c = 0; c < kNumCoeffs; ++c)
                pred += row[c] * f[static_cast<std::size_t>(b) * kNumCoeffs + c];
            REQUIRE(pred == Catch::Approx(segs[0].models[b].predict(t)).margin(1e-12));
        }
    }
}

TEST_CASE("segments JSONL round-trip") {
    namespace fs = std::filesystem;
    ColdConfig cfg;
    Scenario sc;
    sc.width = 6;
    sc.height = 6;
    sc.lakes = {{3.0, 3.0, 2.0, 2.0}};
    sc.t1 = sc.t0 + 365.25 * 6;
    auto [stack, truth] = generate(sc);
    const auto pixels = segment_stack(stack, cfg, 2);
    const auto path = fs::temp_directory_path() / "hydro_segs.jsonl";
    write_segments_jsonl(pixels, path);
    const auto back = read_segments_jsonl(path);

    std::size_t n_segs = 0, n_back = 0;
    for (const auto& px : pixels) n_segs += px.segments.size();
    for (const auto& px : back) n_back += px.segments.size();
    REQUIRE(n_segs == n_back);
    // Spot-check one pixel.
    for (const auto& px : back)
        for (const auto& seg : px.segments) REQUIRE(seg.features().size() == kNumFeatures);
}
