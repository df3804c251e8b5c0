#include "navprune/rng.hpp"

#include <cmath>
#include <numbers>

#include "navprune/linalg.hpp"

namespace navprune {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::vector<double> Rng::normal_vector(std::size_t n, double stddev) {
    std::vector<double> v(n);
    for (double& x : v) x = stddev * normal();
    return v;
}

std::vector<double> Rng::unit_vector(std::size_t n) {
    for (;;) {
        auto v = normal_vector(n);
        if (norm(v) > 0.0) return normalized(v);
    }
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    // splitmix64 finalizer over the combined value.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace navprune
