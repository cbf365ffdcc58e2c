#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "hydro/grid.hpp"

using namespace hydro;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "hydro_grid_test";
    fs::create_directories(dir);
    return dir;
}

Grid make_grid(std::uint32_t w, std::uint32_t h) {
    Grid g(w, h);
    g.origin_x = 100.0;
    g.origin_y = 200.0;
    for (std::size_t i = 0; i < g.size(); ++i) g.samples[i] = static_cast<float>(i) * 0.5f;
    return g;
}

}  // namespace

TEST_CASE("HGRD round-trip is bit-exact") {
    const auto path = temp_dir() / "rt.hgrd";
    Grid g = make_grid(5, 3);
    g.samples[4] = kNoData;
    write_grid(g, path);
    const Grid back = read_grid(path);
    REQUIRE(back.width == g.width);
    REQUIRE(back.height == g.height);
    REQUIRE(back.origin_x == g.origin_x);
    REQUIRE(back.origin_y == g.origin_y);
    REQUIRE(back.pixel_size == g.pixel_size);
    REQUIRE(back.nodata == g.nodata);
    REQUIRE(std::memcmp(back.samples.data(), g.samples.data(), g.size() * 4) == 0);
}

TEST_CASE("bad magic is a format error") {
    const auto path = temp_dir() / "bad.hgrd";
    detail::write_file_atomic(path, "XXXXrest-of-file");
    REQUIRE_THROWS_AS(read_grid(path), format_error);
}

TEST_CASE("truncated payload is rejected") {
    Grid g = make_grid(4, 4);
    std::string buf = encode_grid(g);
    buf.resize(buf.size() - 3);
    REQUIRE_THROWS_AS(decode_grid<float>(buf), format_error);
}

TEST_CASE("hand-assembled 2x2 file decodes to exact samples") {
    // Byte layout: magic, version u16=1, dtype u8=0, reserved u8=0,
    // width/height u32, origin_x/origin_y/pixel_size/nodata f64, payload f32.
    std::string buf = "HGRD";
    const auto put = [&buf](const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    };
    const std::uint16_t version = 1;
    const std::uint8_t dtype = 0, reserved = 0;
    const std::uint32_t w = 2, h = 2;
    const double ox = 0.0, oy = 0.0, ps = 30.0, nd = -9999.0;
    put(&version, 2);
    put(&dtype, 1);
    put(&reserved, 1);
    put(&w, 4);
    put(&h, 4);
    put(&ox, 8);
    put(&oy, 8);
    put(&ps, 8);
    put(&nd, 8);
    const float samples[4] = {0.1f, 0.2f, -9999.0f, 0.4f};
    put(samples, 16);

    const Grid g = decode_grid<float>(buf);
    REQUIRE(g.width == 2);
    REQUIRE(g.height == 2);
    REQUIRE(g.samples == std::vector<float>{0.1f, 0.2f, -9999.0f, 0.4f});
}

TEST_CASE("zero-sized grid is rejected on write") {
    Grid g;
    REQUIRE_THROWS_AS(encode_grid(g), data_error);
}

TEST_CASE("1x1 grid layout: header is 48 bytes plus 4 payload bytes") {
    Grid g(1, 1);
    g.samples[0] = 7.0f;
    const std::string buf = encode_grid(g);
    REQUIRE(buf.size() == 48 + 4);
    float v;
    std::memcpy(&v, buf.data() + 48, 4);
    REQUIRE(v == 7.0f);
}

TEST_CASE("non-finite non-nodata sample is a data error") {
    Grid g = make_grid(2, 2);
    g.samples[1] = std::numeric_limits<float>::quiet_NaN();
    std::string buf;
    {
        // Bypass encode-side checks by patching a valid buffer.
        g.samples[1] = 1.0f;
        buf = encode_grid(g);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(buf.data() + 48 + 4, &nan, 4);
    }
    REQUIRE_THROWS_AS(decode_grid<float>(buf), data_error);
}

TEST_CASE("class grid round-trip") {
    const auto path = temp_dir() / "cls.hgrd";
    ClassGrid g(3, 2);
    g.samples = {0, 1, 2, 3, 255, 1};
    write_grid(g, path);
    const ClassGrid back = read_class_grid(path);
    REQUIRE(back.samples == g.samples);
    REQUIRE(back.nodata == 255.0);
}

TEST_CASE("render_map writes a P6 image, uniform palette") {
    ClassGrid g(2, 2, 1);
    const std::string ppm = encode_ppm(g, {{1, {0, 0, 255}}});
    REQUIRE(ppm.substr(0, 2) == "P6");
    // 4 pixels, all blue.
    const std::string body = ppm.substr(ppm.size() - 12);
    for (int i = 0; i < 4; ++i) {
        REQUIRE(static_cast<unsigned char>(body[3 * i + 0]) == 0);
        REQUIRE(static_cast<unsigned char>(body[3 * i + 1]) == 0);
        REQUIRE(static_cast<unsigned char>(body[3 * i + 2]) == 255);
    }
}

TEST_CASE("render_map rejects unmapped class codes") {
    ClassGrid g(1, 1, 7);
    REQUIRE_THROWS_AS(encode_ppm(g, {{1, {0, 0, 255}}}), data_error);
}

TEST_CASE("rendering is pure: identical inputs give identical bytes") {
    ClassGrid g(4, 4);
    for (std::size_t i = 0; i < g.size(); ++i) g.samples[i] = static_cast<std::uint8_t>(i % 3);
    const Palette pal{{0, {10, 20, 30}}, {1, {40, 50, 60}}, {2, {70, 80, 90}}};
    REQUIRE(encode_ppm(g, pal) == encode_ppm(g, pal));
}
