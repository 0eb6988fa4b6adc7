#include "pdca/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pdca {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    // Box-Muller, one variate per call; the spare is dropped so the stream
    // position depends only on the number of calls.
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
    if (shape < 1.0) {
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform_open_zero(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open_zero();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::beta(double a, double b) {
    for (;;) {
        const double x = gamma(a);
        const double y = gamma(b);
        if (x + y > 0.0) return x / (x + y);
    }
}

std::vector<double> Rng::dirichlet(std::size_t k, double alpha) {
    std::vector<double> out(k);
    for (;;) {
        double total = 0.0;
        for (auto& v : out) {
            v = alpha == 1.0 ? -std::log(uniform_open_zero()) : gamma(alpha);
            total += v;
        }
        if (total > 0.0) {
            for (auto& v : out) v /= total;
            return out;
        }
    }
}

std::size_t Rng::categorical_from_cdf(std::span<const double> cdf) {
    const double u = uniform() * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // upper_bound lands on a cell with cdf[idx] > u >= cdf[idx - 1], so
    // zero-mass cells are never returned.
    const auto idx = static_cast<std::size_t>(it - cdf.begin());
    return std::min(idx, cdf.size() - 1);
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

}  // namespace pdca
