#pragma once

#include "hydro/grid.hpp"

namespace hydro {

// (green - swir1) / (green + swir1). nodata where either input is nodata,
// the denominator is zero, or the ratio falls outside [-1, 1] (possible with
// negative surface-reflectance inputs).
inline Grid compute_mndwi(const Grid& green, const Grid& swir1) {
    if (!green.same_shape(swir1)) throw data_error("mndwi: shape mismatch");
    Grid out(green.width, green.height);
    out.inherit_geo(green);
    const auto ng = static_cast<float>(green.nodata);
    const auto ns = static_cast<float>(swir1.nodata);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float g = green.samples[i];
        const float s = swir1.samples[i];
        if (g == ng || s == ns || g + s == 0.0f) {
            out.samples[i] = kNoData;
            continue;
        }
        const float v = (g - s) / (g + s);
        out.samples[i] = (v >= -1.0f && v <= 1.0f) ? v : kNoData;
    }
    return out;
}

// Water where mndwi > threshold (strict: ties classify as non-water).
inline ClassGrid water_mask(const Grid& mndwi, double threshold = 0.0) {
    ClassGrid out(mndwi.width, mndwi.height);
    out.inherit_geo(mndwi);
    const auto nd = static_cast<float>(mndwi.nodata);
    const auto thr = static_cast<float>(threshold);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float v = mndwi.samples[i];
        out.samples[i] = (v == nd) ? kClassNoData : (v > thr ? 1 : 0);
    }
    return out;
}

// Keeps band samples where qa == 0, nodata elsewhere. Idempotent.
inline Grid apply_qa(const Grid& band, const ClassGrid& qa) {
    if (band.width != qa.width || band.height != qa.height)
        throw data_error("apply_qa: shape mismatch");
    Grid out = band;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (qa.samples[i] != 0) out.samples[i] = static_cast<float>(band.nodata);
    return out;
}

}  // namespace hydro
