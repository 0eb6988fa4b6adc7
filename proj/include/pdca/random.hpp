#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pdca {

/// Seeded stream over std::mt19937_64. The engine output is fixed by the
/// standard, but the std:: distributions are not, so every variate here is
/// derived from raw engine words to stay identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform on (0, 1], safe for log().
    double uniform_open_zero() { return 1.0 - uniform(); }

    double normal();

    /// Gamma(shape, 1) by Marsaglia-Tsang, with the U^(1/shape) boost below 1.
    double gamma(double shape);

    double beta(double a, double b);

    /// Symmetric Dirichlet(alpha, ..., alpha) of dimension k.
    std::vector<double> dirichlet(std::size_t k, double alpha);

    /// Inverse-CDF draw from a nondecreasing cumulative table whose last
    /// entry is the total mass.
    std::size_t categorical_from_cdf(std::span<const double> cdf);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Mixes several integers into one seed (splitmix64 finalizer), used to give
/// every (experiment seed, dataset size, purpose) its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace pdca
