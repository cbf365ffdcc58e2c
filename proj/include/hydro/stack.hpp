#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydro/grid.hpp"

namespace hydro {

inline constexpr int kNumBands = 7;
inline constexpr std::array<const char*, kNumBands> kBandNames = {
    "blue", "green", "red", "nir", "swir1", "swir2", "thermal"};

enum Band : int { kBlue = 0, kGreen, kRed, kNir, kSwir1, kSwir2, kThermal };

// Time-ordered multi-band observations. qa code 0 = clear, 1 = cloud/invalid.
struct SceneStack {
    TileId tile;
    std::vector<double> times;                             // fractional days since 1970-01-01
    std::vector<std::array<Grid, kNumBands>> bands;        // one entry per scene
    std::vector<ClassGrid> qa;                             // one entry per scene

    std::size_t n_scenes() const { return times.size(); }
    std::uint32_t width() const { return bands.empty() ? 0 : bands[0][0].width; }
    std::uint32_t height() const { return bands.empty() ? 0 : bands[0][0].height; }

    void validate() const {
        if (times.empty()) throw data_error("stack: at least one scene required");
        if (bands.size() != times.size() || qa.size() != times.size())
            throw data_error("stack: scene count mismatch");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw data_error("stack: times must be strictly increasing");
        const Grid& ref = bands[0][0];
        for (std::size_t i = 0; i < times.size(); ++i) {
            for (const Grid& b : bands[i])
                if (!b.same_shape(ref)) throw data_error("stack: band grid shape mismatch");
            if (qa[i].width != ref.width || qa[i].height != ref.height)
                throw data_error("stack: qa grid shape mismatch");
        }
    }
};

// Manifest: {"tile":{"h":..,"v":..},"scenes":[{"time_days":..,
// "bands":{"blue":path,...,"thermal":path},"qa":path}]}. Paths are relative
// to the manifest's directory. Scenes are sorted by time on load.
inline SceneStack read_stack(const std::filesystem::path& manifest_path) {
    nlohmann::json doc;
    {
        std::ifstream in(manifest_path);
        if (!in) throw io_error("cannot open manifest " + manifest_path.string());
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw format_error("manifest parse error: " + std::string(e.what()));
        }
    }
    const auto base = manifest_path.parent_path();
    SceneStack stack;
    if (doc.contains("tile")) {
        stack.tile.h = doc["tile"].value("h", 0);
        stack.tile.v = doc["tile"].value("v", 0);
        if (stack.tile.h < 0 || stack.tile.v < 0) throw data_error("manifest: negative tile index");
    }
    if (!doc.contains("scenes") || !doc["scenes"].is_array() || doc["scenes"].empty())
        throw format_error("manifest: missing scenes array");

    struct Entry {
        double t;
        std::size_t idx;
    };
    std::vector<Entry> order;
    for (std::size_t i = 0; i < doc["scenes"].size(); ++i) {
        if (!doc["scenes"][i].contains("time_days"))
            throw format_error("manifest: scene " + std::to_string(i) + " missing time_days");
        order.push_back({doc["scenes"][i]["time_days"].get<double>(), i});
    }
    std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) { return a.t < b.t; });

    for (const Entry& e : order) {
        const auto& scene = doc["scenes"][e.idx];
        const std::string scene_name = "scene t=" + std::to_string(e.t);
        std::array<Grid, kNumBands> band_grids;
        for (int b = 0; b < kNumBands; ++b) {
            if (!scene.contains("bands") || !scene["bands"].contains(kBandNames[b]))
                throw format_error("manifest: " + scene_name + " missing band '" + kBandNames[b] + "'");
            band_grids[b] = read_grid(base / scene["bands"][kBandNames[b]].get<std::string>());
        }
        if (!scene.contains("qa")) throw format_error("manifest: " + scene_name + " missing qa");
        stack.times.push_back(e.t);
        stack.bands.push_back(std::move(band_grids));
        stack.qa.push_back(read_class_grid(base / scene["qa"].get<std::string>()));
    }
    for (std::size_t i = 1; i < stack.times.size(); ++i)
        if (stack.times[i] == stack.times[i - 1]) throw data_error("manifest: duplicate timestamps");
    stack.validate();
    return stack;
}

// Writes grids + manifest for a stack; returns the manifest path.
inline std::filesystem::path write_stack(const SceneStack& stack, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json doc;
    doc["tile"] = {{"h", stack.tile.h}, {"v", stack.tile.v}};
    doc["scenes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < stack.n_scenes(); ++i) {
        nlohmann::json scene;
        scene["time_days"] = stack.times[i];
        for (int b = 0; b < kNumBands; ++b) {
            const std::string fname = "s" + std::to_string(i) + "_" + kBandNames[b] + ".hgrd";
            write_grid(stack.bands[i][b], dir / fname);
            scene["bands"][kBandNames[b]] = fname;
        }
        const std::string qname = "s" + std::to_string(i) + "_qa.hgrd";
        write_grid(stack.qa[i], dir / qname);
        scene["qa"] = qname;
        doc["scenes"].push_back(scene);
    }
    const auto path = dir / "manifest.json";
    detail::write_file_atomic(path, doc.dump(2) + "\n");
    return path;
}

}  // namespace hydro
