#pragma once
// Score, count and ancillary-feature densities, and their weighted
// maximum-likelihood fitters.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace nestmix {

// Raised when a weighted fit has no usable solution.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NormalParams {
    double mean = 0.0;
    double sd = 1.0;

    bool operator==(const NormalParams&) const = default;
};

// Gamma(shape, scale) evaluated at x - shift; support is x > shift.
struct ShiftedGammaParams {
    double shape = 1.0;
    double scale = 1.0;
    double shift = 0.0;

    bool operator==(const ShiftedGammaParams&) const = default;
};

// Zero-truncated Poisson with mean parameter rate_per_length * length.
struct TruncPoissonParams {
    double rate_per_length = 1.0;

    bool operator==(const TruncPoissonParams&) const = default;
};

struct MultinomialParams {
    std::array<double, 3> probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    bool operator==(const MultinomialParams&) const = default;
};

// Score density family plus parameters; the ordered (f0, f1) pair of a model
// holds one of these per component.
using ScoreDensity = std::variant<NormalParams, ShiftedGammaParams>;

double normal_log_pdf(double x, const NormalParams& p) noexcept;
double shifted_gamma_log_pdf(double x, const ShiftedGammaParams& p) noexcept;
double score_log_pdf(double x, const ScoreDensity& d) noexcept;

// Throws std::domain_error for n < 1.
double trunc_poisson_log_pmf(std::int64_t n, std::int64_t length, const TruncPoissonParams& p);

// Throws std::domain_error for a state outside {0, 1, 2}.
double multinomial_log_pmf(int state, const MultinomialParams& p);

std::string describe(const ScoreDensity& d);

// ---------------------------------------------------------------------------
// Weighted fitters. Zero-weight entries are ignored; weights need not sum to 1
// and every fitter is invariant to rescaling them.

// Weighted mean and biased (1/sum w) variance.
NormalParams fit_normal_weighted(std::span<const double> xs, std::span<const double> weights);

// (shape, scale) of Gamma(x - shift) with the shift held fixed. The scale is
// profiled out (scale = weighted mean of (x - shift) / shape) and the shape
// found by a bracketed 1-D search on log(shape).
ShiftedGammaParams fit_shifted_gamma_weighted(std::span<const double> xs, std::span<const double> weights,
                                              double shift);

struct TruncPoissonFit {
    TruncPoissonParams params;
    bool at_lower_bound = false;
    bool at_upper_bound = false;
};

// Rate c maximizing sum_k w_k log h(n_k | l_k, c); 1-D search on log c over
// [1e-6, 10] x (sum w n / sum w l). A boundary solution is reported through
// the flags rather than thrown.
TruncPoissonFit fit_trunc_poisson_weighted(std::span<const std::int64_t> ns, std::span<const std::int64_t> lengths,
                                           std::span<const double> weights);

// probs[s] proportional to (weighted count of s) + pseudocount.
MultinomialParams fit_multinomial_weighted(std::span<const int> states, std::span<const double> weights,
                                           double pseudocount);

// Refits the family held by `current`, keeping a gamma shift fixed.
ScoreDensity fit_score_density(const ScoreDensity& current, std::span<const double> xs,
                               std::span<const double> weights);

// Weighted log-likelihoods, as maximized by the fitters above.
double weighted_normal_loglik(std::span<const double> xs, std::span<const double> weights, const NormalParams& p);
double weighted_gamma_loglik(std::span<const double> xs, std::span<const double> weights,
                             const ShiftedGammaParams& p);
double weighted_trunc_poisson_loglik(std::span<const std::int64_t> ns, std::span<const std::int64_t> lengths,
                                     std::span<const double> weights, const TruncPoissonParams& p);

}  // namespace nestmix
