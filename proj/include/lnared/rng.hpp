#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lnared {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11), bitwise
// compatible with numpy.random.Philox: numpy's first block for counter c
// equals this function at counter c+1 (numpy increments before generating).
//
// Stateless by design: the ensemble addresses draws by
// (seed, realization, step, channel block), which makes substreams
// independent by construction and reproducible under any work schedule.
inline std::array<std::uint64_t, 4> philox4x64(std::uint64_t c0, std::uint64_t c1,
                                               std::uint64_t c2, std::uint64_t c3,
                                               std::uint64_t k0, std::uint64_t k1) {
    constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL; // golden ratio
    constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL; // sqrt(3) - 1
    for (int r = 0; r < 10; ++r) {
        const unsigned __int128 p0 = static_cast<unsigned __int128>(M0) * c0;
        const unsigned __int128 p1 = static_cast<unsigned __int128>(M1) * c2;
        const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
        const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
        const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
        const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += W0;
        k1 += W1;
    }
    return {c0, c1, c2, c3};
}

// Top 53 bits, centered: u in (0, 1), never exactly 0 or 1. The all-ones word
// would round up to 1.0 (and the normal quantile to +inf), so it is pinned to
// the largest representable value below 1.
inline double uniform_from_bits(std::uint64_t w) {
    const double u = (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
    return u < 1.0 ? u : 1.0 - 0x1.0p-53;
}

// Acklam's rational approximation of the standard normal quantile,
// |relative error| < 1.2e-9. That bias sits about six orders below the Monte
// Carlo bands used here, so no Newton polish step is applied.
inline double inv_normal_cdf(double p) {
    constexpr double a0 = -3.969683028665376e+01, a1 = 2.209460984245205e+02,
                     a2 = -2.759285104469687e+02, a3 = 1.383577518672690e+02,
                     a4 = -3.066479806614716e+01, a5 = 2.506628277459239e+00;
    constexpr double b0 = -5.447609879822406e+01, b1 = 1.615858368580409e+02,
                     b2 = -1.556989798598866e+02, b3 = 6.680131188771972e+01,
                     b4 = -1.328068155288572e+01;
    constexpr double c0 = -7.784894002430293e-03, c1 = -3.223964580411365e-01,
                     c2 = -2.400758277161838e+00, c3 = -2.549732539343734e+00,
                     c4 = 4.374664141464968e+00, c5 = 2.938163982698783e+00;
    constexpr double d0 = 7.784695709041462e-03, d1 = 3.224671290700398e-01,
                     d2 = 2.445134137142996e+00, d3 = 3.754408661907416e+00;
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) /
               ((((d0 * q + d1) * q + d2) * q + d3) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a0 * r + a1) * r + a2) * r + a3) * r + a4) * r + a5) * q /
               (((((b0 * r + b1) * r + b2) * r + b3) * r + b4) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) /
           ((((d0 * q + d1) * q + d2) * q + d3) * q + 1.0);
}

// Second key word separating the Gaussian stream from any future one.
constexpr std::uint64_t kNormalStreamTag = 0x6d6f6d656e747330ULL;

// Four standard normals addressed by (seed, realization, step, block).
// Channels 4b..4b+3 of one Euler-Maruyama step consume block b.
inline std::array<double, 4> normal_block(std::uint64_t seed, std::uint64_t realization,
                                          std::uint64_t step, std::uint64_t block) {
    const auto w = philox4x64(realization, step, block, 0, seed, kNormalStreamTag);
    return {inv_normal_cdf(uniform_from_bits(w[0])), inv_normal_cdf(uniform_from_bits(w[1])),
            inv_normal_cdf(uniform_from_bits(w[2])), inv_normal_cdf(uniform_from_bits(w[3]))};
}

} // namespace lnared
