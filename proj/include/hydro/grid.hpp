#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "hydro/common.hpp"

namespace hydro {

struct TileId {
    int h = 0;
    int v = 0;
};

// Single-band raster. origin is the projected coordinate of the top-left
// corner; samples are row-major, top row first.
template <typename T>
struct GridT {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size = 30.0;
    double nodata = kNoData;
    std::vector<T> samples;

    GridT() = default;
    GridT(std::uint32_t w, std::uint32_t h, T fill = T{})
        : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {
        if constexpr (sizeof(T) == 1) nodata = kClassNoData;
    }

    std::size_t size() const { return static_cast<std::size_t>(width) * height; }
    T at(std::uint32_t x, std::uint32_t y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
    T& at(std::uint32_t x, std::uint32_t y) { return samples[static_cast<std::size_t>(y) * width + x]; }

    bool same_shape(const GridT& o) const {
        return width == o.width && height == o.height && origin_x == o.origin_x &&
               origin_y == o.origin_y && pixel_size == o.pixel_size;
    }

    // Copies geotransform (not samples) from a source grid.
    template <typename U>
    void inherit_geo(const GridT<U>& src) {
        origin_x = src.origin_x;
        origin_y = src.origin_y;
        pixel_size = src.pixel_size;
    }
};

using Grid = GridT<float>;
using ClassGrid = GridT<std::uint8_t>;

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
    put_bytes(out, &v, sizeof(v));
}

template <typename T>
T get_le(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw format_error("HGRD: truncated header");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(v));
    off += sizeof(v);
    return v;
}

template <typename T>
constexpr std::uint8_t hgrd_dtype() {
    if constexpr (sizeof(T) == 4) return 0;  // f32
    else return 1;                           // u8
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& data) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot write " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw io_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

// HGRD layout: "HGRD" | version u16=1 | dtype u8 (0=f32, 1=u8) | reserved u8=0
// | width u32 | height u32 | origin_x f64 | origin_y f64 | pixel_size f64
// | nodata f64 | row-major payload. Little-endian throughout.
template <typename T>
std::string encode_grid(const GridT<T>& g) {
    if (g.width == 0 || g.height == 0) throw data_error("HGRD: zero-sized grid");
    if (g.samples.size() != g.size()) throw data_error("HGRD: sample count mismatch");
    if (g.pixel_size <= 0.0) throw data_error("HGRD: pixel_size must be positive");
    std::string out;
    out.reserve(44 + g.samples.size() * sizeof(T));
    out.append("HGRD", 4);
    detail::put_le<std::uint16_t>(out, 1);
    detail::put_le<std::uint8_t>(out, detail::hgrd_dtype<T>());
    detail::put_le<std::uint8_t>(out, 0);
    detail::put_le<std::uint32_t>(out, g.width);
    detail::put_le<std::uint32_t>(out, g.height);
    detail::put_le<double>(out, g.origin_x);
    detail::put_le<double>(out, g.origin_y);
    detail::put_le<double>(out, g.pixel_size);
    detail::put_le<double>(out, g.nodata);
    detail::put_bytes(out, g.samples.data(), g.samples.size() * sizeof(T));
    return out;
}

template <typename T>
GridT<T> decode_grid(const std::string& buf) {
    if (buf.size() < 4 || std::memcmp(buf.data(), "HGRD", 4) != 0)
        throw format_error("HGRD: bad magic");
    std::size_t off = 4;
    const auto version = detail::get_le<std::uint16_t>(buf, off);
    if (version != 1) throw format_error("HGRD: unsupported version");
    const auto dtype = detail::get_le<std::uint8_t>(buf, off);
    if (dtype != detail::hgrd_dtype<T>()) throw format_error("HGRD: dtype mismatch");
    detail::get_le<std::uint8_t>(buf, off);  // reserved
    GridT<T> g;
    g.width = detail::get_le<std::uint32_t>(buf, off);
    g.height = detail::get_le<std::uint32_t>(buf, off);
    g.origin_x = detail::get_le<double>(buf, off);
    g.origin_y = detail::get_le<double>(buf, off);
    g.pixel_size = detail::get_le<double>(buf, off);
    g.nodata = detail::get_le<double>(buf, off);
    if (g.width == 0 || g.height == 0) throw format_error("HGRD: zero-sized grid");
    if (g.pixel_size <= 0.0) throw format_error("HGRD: non-positive pixel_size");
    const std::size_t n = g.size();
    if (buf.size() - off != n * sizeof(T)) throw format_error("HGRD: truncated payload");
    g.samples.resize(n);
    std::memcpy(g.samples.data(), buf.data() + off, n * sizeof(T));
    if constexpr (sizeof(T) == 4) {
        const auto nd = static_cast<float>(g.nodata);
        for (float v : g.samples)
            if (!std::isfinite(v) && v != nd)
                throw data_error("HGRD: non-finite sample that is not nodata");
    }
    return g;
}

template <typename T>
void write_grid(const GridT<T>& g, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_grid(g));
}

template <typename T>
GridT<T> read_grid_as(const std::filesystem::path& path) {
    return decode_grid<T>(detail::read_file(path));
}

inline Grid read_grid(const std::filesystem::path& path) { return read_grid_as<float>(path); }
inline ClassGrid read_class_grid(const std::filesystem::path& path) {
    return read_grid_as<std::uint8_t>(path);
}

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

using Palette = std::map<std::uint8_t, Rgb>;

// Binary PPM (P6), one image pixel per grid cell. Pure: same inputs give
// byte-identical output.
inline std::string encode_ppm(const ClassGrid& grid, const Palette& palette) {
    std::string out = "P6\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n";
    out.reserve(out.size() + grid.size() * 3);
    for (std::uint8_t code : grid.samples) {
        Rgb c{0, 0, 0};
        if (code != kClassNoData) {
            auto it = palette.find(code);
            if (it == palette.end())
                throw data_error("render: class code " + std::to_string(code) + " has no palette entry");
            c = it->second;
        }
        out.push_back(static_cast<char>(c.r));
        out.push_back(static_cast<char>(c.g));
        out.push_back(static_cast<char>(c.b));
    }
    return out;
}

inline void render_map(const ClassGrid& grid, const Palette& palette,
                       const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_ppm(grid, palette));
}

}  // namespace hydro
