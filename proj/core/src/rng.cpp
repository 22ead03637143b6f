#include "jumpbsde/rng.hpp"

#include <cmath>
#include <numbers>

namespace jumpbsde {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

inline double to_unit_open(std::uint64_t bits) {
    // 53-bit mantissa, offset by half an ulp: strictly inside (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::generate(const std::array<std::uint32_t, 4>& counter,
                                                  std::uint64_t key) {
    std::array<std::uint32_t, 4> ctr = counter;
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return ctr;
}

double SubStream::uniform() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    const std::array<std::uint32_t, 4> ctr = {
        next_draw_,
        step_,
        static_cast<std::uint32_t>(path_),
        static_cast<std::uint32_t>(path_ >> 32),
    };
    ++next_draw_;
    const auto words = Philox4x32::generate(ctr, seed_);
    const std::uint64_t a =
        static_cast<std::uint64_t>(words[0]) | (static_cast<std::uint64_t>(words[1]) << 32);
    const std::uint64_t b =
        static_cast<std::uint64_t>(words[2]) | (static_cast<std::uint64_t>(words[3]) << 32);
    cached_ = to_unit_open(b);
    have_cached_ = true;
    return to_unit_open(a);
}

double SubStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint32_t SubStream::poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint32_t k = 0;
    // Finite walk: cap well past any mass reachable at desk-scale means.
    const std::uint32_t cap = 64 + static_cast<std::uint32_t>(16.0 * mean);
    while (u > cdf && k < cap) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

}  // namespace jumpbsde
