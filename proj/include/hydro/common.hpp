#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hydro {

// Error taxonomy maps onto CLI exit codes: config=2, data=3, internal=4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct format_error : data_error {
    using data_error::data_error;
};
struct io_error : data_error {
    using data_error::data_error;
};

inline constexpr float  kNoData       = -9999.0f;
inline constexpr std::uint8_t kClassNoData = 255;
inline constexpr double kDaysPerYear  = 365.25;

inline bool is_nodata(float v) { return v == kNoData; }

// UTC calendar year of a fractional-days-since-1970 timestamp.
inline int year_of_days(double t_days) {
    // Civil-from-days (Howard Hinnant's algorithm), valid for our range.
    std::int64_t z = static_cast<std::int64_t>(std::floor(t_days));
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::int64_t doe = z - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y   = yoe + era * 400;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp  = (5 * doy + 2) / 153;
    return static_cast<int>(y + (mp >= 10 ? 1 : 0));
}

// FNV-1a 64-bit, used for config hashes and artifact digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

}  // namespace hydro
