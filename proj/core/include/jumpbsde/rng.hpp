#pragma once

#include <array>
#include <cstdint>

namespace jumpbsde {

/// Philox4x32-10 counter-based generator.
///
/// Stateless: each 128-bit counter block is hashed independently under a
/// 64-bit key, so any (path, step, draw) coordinate can be generated out of
/// order and in parallel with bit-identical results.
struct Philox4x32 {
    static std::array<std::uint32_t, 4> generate(const std::array<std::uint32_t, 4>& counter,
                                                 std::uint64_t key);
};

/// Per-(path, step) stream of uniforms, normals and Poisson counts.
///
/// Draw order is fixed by the draw index alone, so consumers that pull the
/// same sequence of variates always see the same values regardless of
/// threading or call site.
class SubStream {
public:
    SubStream(std::uint64_t seed, std::uint64_t path, std::uint32_t step)
        : seed_(seed), path_(path), step_(step) {}

    /// Uniform draw strictly inside (0, 1).
    double uniform();

    /// Standard normal via Box-Muller (consumes two uniforms).
    double normal();

    /// Poisson count with the given mean, by CDF inversion (one uniform).
    std::uint32_t poisson(double mean);

private:
    std::uint64_t seed_;
    std::uint64_t path_;
    std::uint32_t step_;
    std::uint32_t next_draw_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace jumpbsde
