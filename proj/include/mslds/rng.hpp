#pragma once

#include <cstdint>

#include "mslds/types.hpp"

namespace mslds {

/// Counter-based splittable RNG. Every draw is a pure function of
/// (seed, stream, step, lane), so trajectories are reproducible bit for bit
/// and independent streams can be generated concurrently.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    /// Uniform in [0, 1), keyed by (step, lane).
    double uniform(std::uint64_t step, std::uint64_t lane) const;

    /// Standard normal via Box-Muller on two keyed uniforms.
    double gaussian(std::uint64_t step, std::uint64_t lane) const;

    /// Vector of iid standard normals.
    Vector gaussian_vector(std::uint64_t step, Index dim,
                           std::uint64_t lane_base = 0) const;

    /// Uniform on the unit ball in `dim` dimensions.
    Vector uniform_ball(std::uint64_t step, Index dim,
                        std::uint64_t lane_base = 0) const;

    /// +1/-1 with equal probability.
    double rademacher(std::uint64_t step, std::uint64_t lane) const;

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t step, std::uint64_t lane,
                                std::uint64_t n) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

}  // namespace mslds
