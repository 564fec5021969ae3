#pragma once
// Bracketed 1-D maximization (Brent's method: golden section plus parabolic
// interpolation), relative tolerance 1e-8, at most 200 iterations.

#include <cmath>
#include <cstdint>

#include <boost/math/tools/minima.hpp>

namespace nestmix {

struct ScalarMaximum {
    double x = 0.0;
    double value = 0.0;
    std::uintmax_t iterations = 0;
    bool at_lower = false;
    bool at_upper = false;
};

inline constexpr int kOptimizerBits = 28;  // 2^-27 ~ 7.5e-9 relative
inline constexpr std::uintmax_t kOptimizerMaxIter = 200;

template <typename F>
ScalarMaximum maximize_scalar(F&& f, double lo, double hi) {
    std::uintmax_t iters = kOptimizerMaxIter;
    const auto [x, neg] = boost::math::tools::brent_find_minima(
        [&](double t) {
            const double v = f(t);
            return std::isnan(v) ? HUGE_VAL : -v;
        },
        lo, hi, kOptimizerBits, iters);
    ScalarMaximum out;
    out.x = x;
    out.value = -neg;
    out.iterations = iters;
    // Treat a solution within 1e-6 of the bracket width as sitting on the edge.
    const double edge = 1e-6 * (hi - lo);
    out.at_lower = x - lo <= edge;
    out.at_upper = hi - x <= edge;
    return out;
}

}  // namespace nestmix
