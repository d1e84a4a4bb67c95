#include "mslds/rng.hpp"

#include <cmath>

namespace mslds {

namespace {

// SplitMix64 finalizer; full avalanche, good enough as a counter-mode PRF
// when chained over the key words.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream,
                    std::uint64_t step, std::uint64_t lane) {
    std::uint64_t h = mix(seed);
    h = mix(h ^ stream);
    h = mix(h ^ step);
    h = mix(h ^ lane);
    return h;
}

}  // namespace

double CounterRng::uniform(std::uint64_t step, std::uint64_t lane) const {
    // 53 high bits -> double in [0,1)
    return static_cast<double>(keyed(seed_, stream_, step, lane) >> 11) *
           0x1.0p-53;
}

double CounterRng::gaussian(std::uint64_t step, std::uint64_t lane) const {
    double u1 = uniform(step, 2 * lane);
    double u2 = uniform(step, 2 * lane + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vector CounterRng::gaussian_vector(std::uint64_t step, Index dim,
                                   std::uint64_t lane_base) const {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i)
        v[i] = gaussian(step, lane_base + static_cast<std::uint64_t>(i));
    return v;
}

Vector CounterRng::uniform_ball(std::uint64_t step, Index dim,
                                std::uint64_t lane_base) const {
    // Gaussian direction, radius ~ U^(1/d)
    Vector g = gaussian_vector(step, dim, lane_base + 1);
    double norm = g.norm();
    if (norm == 0.0) return Vector::Zero(dim);
    double u = uniform(step, 2 * (lane_base + static_cast<std::uint64_t>(dim) + 7));
    double radius = std::pow(u, 1.0 / static_cast<double>(dim));
    return g * (radius / norm);
}

double CounterRng::rademacher(std::uint64_t step, std::uint64_t lane) const {
    return (keyed(seed_, stream_, step, lane) & 1ULL) ? 1.0 : -1.0;
}

std::uint64_t CounterRng::uniform_index(std::uint64_t step, std::uint64_t lane,
                                        std::uint64_t n) const {
    return keyed(seed_, stream_, step, lane) % n;
}

}  // namespace mslds
