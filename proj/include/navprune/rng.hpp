#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace navprune {

// Seeded generator with platform-independent uniform and normal draws.
// std::normal_distribution is implementation-defined, so it is avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    bool bernoulli(double p) { return uniform() < p; }
    std::vector<double> normal_vector(std::size_t n, double stddev = 1.0);
    std::vector<double> unit_vector(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace navprune
