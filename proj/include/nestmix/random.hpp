#pragma once
// Portable random streams.
//
// std::mt19937_64 produces the same sequence on every conforming platform,
// but the std:: distributions do not, so all samplers used for simulation
// and random restarts are written against the raw engine output.
//
// Stream splitting: stream `k` of a run seeded with `seed` is an
// mt19937_64 seeded with splitmix64(seed ^ splitmix64(k + 1)).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nestmix {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ splitmix64(stream + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(derive_seed(seed, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform() {
        for (;;) {
            const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer uniform on [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double exponential(double mean) { return -mean * std::log(uniform()); }

    // Marsaglia polar method.
    double normal(double mean, double sd) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return mean + sd * u * m;
    }

    // Marsaglia-Tsang; shape < 1 handled by the u^(1/shape) boost.
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0, 1.0);
            return scale * g * std::pow(uniform(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal(0.0, 1.0);
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
        }
    }

    // Poisson conditioned on a strictly positive count, by inversion.
    int zero_truncated_poisson(double lambda) {
        const double u = uniform();
        const double log_norm = std::log(-std::expm1(-lambda));
        const double log_lambda = std::log(lambda);
        double cdf = 0.0;
        int n = 1;
        for (;; ++n) {
            const double log_pmf = -lambda + n * log_lambda - std::lgamma(n + 1.0) - log_norm;
            cdf += std::exp(log_pmf);
            if (u <= cdf) return n;
            // Mass beyond here is below double resolution.
            if (n > lambda && log_pmf < -745.0) return n;
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace nestmix
