#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace tsec {

/// Engine used throughout the library. Every stochastic routine takes it explicitly.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for (master, replicate, stream). Streams identify methods or sub-tasks.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream) noexcept {
    return mix64(mix64(mix64(master) ^ replicate) + 0x632BE59BD9B4E019ULL * (stream + 1));
}

/// Uniform draw on the open interval (0, 1) from the top 53 bits of a 64-bit engine.
template <class URBG>
double uniform_open(URBG& rng) {
    static_assert(URBG::min() == 0 && URBG::max() == ~std::uint64_t{0}, "uniform_open expects a full 64-bit engine");
    for (;;) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u > 0.0) return u;
    }
}

inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x * (1.0 / std::numbers::sqrt2));
}

/// Standard normal quantile, Wichura's AS241 (PPND16); about 1e-16 relative accuracy.
inline double normal_quantile(double p) {
    if (!(p > 0.0)) return p == 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
    if (!(p < 1.0)) return p == 1.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -x : x;
}

template <class URBG>
double standard_normal(URBG& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Draw X ~ N(0,1) conditioned on X >= lower, given tail = Phi(-lower).
///
/// Inverse-CDF through the upper tail mass, which stays accurate for moderately
/// large `lower`; callers drawing many values against one bound pass the tail
/// mass in once. Beyond five standard deviations the translated exponential
/// rejection sampler of Robert (1995) is used instead.
template <class URBG>
double standard_normal_above(double lower, double tail, URBG& rng) {
    if (lower > 5.0) {
        const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
        for (;;) {
            const double x = lower - std::log(uniform_open(rng)) / rate;
            const double d = x - rate;
            if (uniform_open(rng) <= std::exp(-0.5 * d * d)) return x;
        }
    }
    const double x = -normal_quantile(uniform_open(rng) * tail);
    return x < lower ? lower : x;
}

template <class URBG>
double standard_normal_above(double lower, URBG& rng) {
    return standard_normal_above(lower, normal_cdf(-lower), rng);
}

/// Beta(a, b) via the gamma ratio.
template <class URBG>
double beta_draw(double a, double b, URBG& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

} // namespace tsec
