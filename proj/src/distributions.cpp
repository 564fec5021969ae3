#include "nestmix/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "nestmix/optimize.hpp"

namespace nestmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_sizes(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(fmt::format("{}: value and weight lengths differ ({} vs {})", what, a, b));
}

// log(1 - exp(-lambda)), accurate for small lambda.
double log_one_minus_exp_neg(double lambda) { return std::log(-std::expm1(-lambda)); }

struct GammaSuffStats {
    double w = 0.0;      // sum w
    double s = 0.0;      // sum w y
    double logs = 0.0;   // sum w log y
    double ss = 0.0;     // sum w (y - mean)^2
};

GammaSuffStats gamma_stats(std::span<const double> xs, std::span<const double> weights, double shift) {
    GammaSuffStats st;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = weights[i];
        if (w == 0.0) continue;
        if (w < 0.0 || !std::isfinite(w)) throw FitError("gamma fit: weights must be finite and nonnegative");
        const double y = xs[i] - shift;
        if (!(y > 0.0)) {
            throw FitError(fmt::format("gamma fit: score {} with positive weight is not above the shift {}", xs[i], shift));
        }
        st.w += w;
        st.s += w * y;
        st.logs += w * std::log(y);
    }
    if (!(st.w > 0.0)) throw FitError("gamma fit: all weights are zero");
    const double mean = st.s / st.w;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double d = xs[i] - shift - mean;
        st.ss += weights[i] * d * d;
    }
    return st;
}

}  // namespace

double normal_log_pdf(double x, const NormalParams& p) noexcept {
    const double z = (x - p.mean) / p.sd;
    return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(p.sd) - 0.5 * z * z;
}

double shifted_gamma_log_pdf(double x, const ShiftedGammaParams& p) noexcept {
    const double y = x - p.shift;
    if (!(y > 0.0)) return kNegInf;
    return (p.shape - 1.0) * std::log(y) - y / p.scale - p.shape * std::log(p.scale) - std::lgamma(p.shape);
}

double score_log_pdf(double x, const ScoreDensity& d) noexcept {
    if (const auto* n = std::get_if<NormalParams>(&d)) return normal_log_pdf(x, *n);
    return shifted_gamma_log_pdf(x, std::get<ShiftedGammaParams>(d));
}

double trunc_poisson_log_pmf(std::int64_t n, std::int64_t length, const TruncPoissonParams& p) {
    if (n < 1) throw std::domain_error(fmt::format("truncated Poisson: count must be >= 1, got {}", n));
    const double lambda = p.rate_per_length * static_cast<double>(length);
    const double nd = static_cast<double>(n);
    return -lambda + nd * std::log(lambda) - std::lgamma(nd + 1.0) - log_one_minus_exp_neg(lambda);
}

double multinomial_log_pmf(int state, const MultinomialParams& p) {
    if (state < 0 || state > 2) throw std::domain_error(fmt::format("multinomial: state {} outside {{0,1,2}}", state));
    const double pr = p.probs[static_cast<std::size_t>(state)];
    return pr > 0.0 ? std::log(pr) : kNegInf;
}

std::string describe(const ScoreDensity& d) {
    if (const auto* n = std::get_if<NormalParams>(&d)) return fmt::format("N({}, {}^2)", n->mean, n->sd);
    const auto& g = std::get<ShiftedGammaParams>(d);
    return fmt::format("G({}, {}, {})", g.shape, g.scale, g.shift);
}

NormalParams fit_normal_weighted(std::span<const double> xs, std::span<const double> weights) {
    check_sizes(xs.size(), weights.size(), "normal fit");
    double w = 0.0, s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw FitError("normal fit: weights must be finite and nonnegative");
        w += weights[i];
        s += weights[i] * xs[i];
    }
    if (!(w > 0.0)) throw FitError("normal fit: all weights are zero");
    const double mean = s / w;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - mean;
        ss += weights[i] * d * d;
    }
    const double var = ss / w;
    if (!(var > 0.0)) throw FitError("normal fit: degenerate score distribution (zero variance)");
    return {mean, std::sqrt(var)};
}

ShiftedGammaParams fit_shifted_gamma_weighted(std::span<const double> xs, std::span<const double> weights,
                                              double shift) {
    check_sizes(xs.size(), weights.size(), "gamma fit");
    const auto st = gamma_stats(xs, weights, shift);
    const double mean = st.s / st.w;
    const double var = st.ss / st.w;
    if (!(var > 0.0)) throw FitError("gamma fit: degenerate score distribution (zero variance)");

    // Profile log-likelihood in t = log(shape), scale = mean / shape.
    auto profile = [&](double t) {
        const double a = std::exp(t);
        return (a - 1.0) * st.logs - st.w * a - st.w * a * std::log(mean / a) - st.w * std::lgamma(a);
    };
    const double moment_shape = mean * mean / var;
    const double lo = std::log(moment_shape * 1e-3);
    const double hi = std::log(moment_shape * 1e3);
    const auto best = maximize_scalar(profile, lo, hi);
    if (best.at_lower || best.at_upper) {
        throw FitError(fmt::format("gamma fit: no interior optimum for shape in [{}, {}] (search ended at {})",
                                   std::exp(lo), std::exp(hi), std::exp(best.x)));
    }
    const double shape = std::exp(best.x);
    return {shape, mean / shape, shift};
}

TruncPoissonFit fit_trunc_poisson_weighted(std::span<const std::int64_t> ns, std::span<const std::int64_t> lengths,
                                           std::span<const double> weights) {
    check_sizes(ns.size(), weights.size(), "truncated Poisson fit");
    check_sizes(lengths.size(), weights.size(), "truncated Poisson fit");
    double w = 0.0, wn = 0.0, wl = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        if (weights[k] < 0.0 || !std::isfinite(weights[k])) {
            throw FitError("truncated Poisson fit: weights must be finite and nonnegative");
        }
        if (ns[k] < 1 || lengths[k] < 1) throw FitError("truncated Poisson fit: counts and lengths must be >= 1");
        w += weights[k];
        wn += weights[k] * static_cast<double>(ns[k]);
        wl += weights[k] * static_cast<double>(lengths[k]);
    }
    if (!(w > 0.0)) throw FitError("truncated Poisson fit: all weights are zero");

    const double moment = wn / wl;
    auto objective = [&](double t) {
        const double c = std::exp(t);
        double ll = 0.0;
        for (std::size_t k = 0; k < ns.size(); ++k) {
            if (weights[k] == 0.0) continue;
            const double lambda = c * static_cast<double>(lengths[k]);
            // n! term is constant in c and dropped.
            ll += weights[k] * (-lambda + static_cast<double>(ns[k]) * std::log(lambda) - log_one_minus_exp_neg(lambda));
        }
        return ll;
    };
    const double lo = std::log(moment * 1e-6);
    const double hi = std::log(moment * 10.0);
    const auto best = maximize_scalar(objective, lo, hi);

    TruncPoissonFit fit;
    fit.at_lower_bound = best.at_lower;
    fit.at_upper_bound = best.at_upper;
    const double t = best.at_lower ? lo : best.at_upper ? hi : best.x;
    fit.params.rate_per_length = std::exp(t);
    return fit;
}

MultinomialParams fit_multinomial_weighted(std::span<const int> states, std::span<const double> weights,
                                           double pseudocount) {
    check_sizes(states.size(), weights.size(), "multinomial fit");
    std::array<double, 3> counts{pseudocount, pseudocount, pseudocount};
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i] < 0 || states[i] > 2) throw FitError(fmt::format("multinomial fit: state {} outside {{0,1,2}}", states[i]));
        counts[static_cast<std::size_t>(states[i])] += weights[i];
    }
    const double total = counts[0] + counts[1] + counts[2];
    if (!(total > 0.0)) throw FitError("multinomial fit: no weight and no pseudocount");
    MultinomialParams p;
    for (std::size_t s = 0; s < 3; ++s) p.probs[s] = counts[s] / total;
    return p;
}

ScoreDensity fit_score_density(const ScoreDensity& current, std::span<const double> xs,
                               std::span<const double> weights) {
    if (std::holds_alternative<NormalParams>(current)) return fit_normal_weighted(xs, weights);
    return fit_shifted_gamma_weighted(xs, weights, std::get<ShiftedGammaParams>(current).shift);
}

double weighted_normal_loglik(std::span<const double> xs, std::span<const double> weights, const NormalParams& p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (weights[i] != 0.0) ll += weights[i] * normal_log_pdf(xs[i], p);
    }
    return ll;
}

double weighted_gamma_loglik(std::span<const double> xs, std::span<const double> weights,
                             const ShiftedGammaParams& p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (weights[i] != 0.0) ll += weights[i] * shifted_gamma_log_pdf(xs[i], p);
    }
    return ll;
}

double weighted_trunc_poisson_loglik(std::span<const std::int64_t> ns, std::span<const std::int64_t> lengths,
                                     std::span<const double> weights, const TruncPoissonParams& p) {
    double ll = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        if (weights[k] != 0.0) ll += weights[k] * trunc_poisson_log_pmf(ns[k], lengths[k], p);
    }
    return ll;
}

}  // namespace nestmix
