#pragma once
// The full parameter vector of the nested mixture and its text serialization.

#include <iosfwd>
#include <string>
#include <string_view>

#include "nestmix/distributions.hpp"

namespace nestmix {

enum class Pi0Mode { fixed, free };

// Which families play the incorrect (f0) and correct (f1) score roles.
// real: f0 = Normal, f1 = shifted Gamma. sim: f0 = shifted Gamma, f1 = Normal.
enum class DensityRoles { real, sim };

struct ModelParams {
    double pi0_star = 0.5;  // proportion of absent proteins
    double pi0 = 1.0;       // proportion of incorrect peptides on absent proteins
    double pi1 = 0.5;       // proportion of incorrect peptides on present proteins
    ScoreDensity f0 = NormalParams{};
    ScoreDensity f1 = ShiftedGammaParams{};
    MultinomialParams ntt0, ntt1, nmc0, nmc1;
    TruncPoissonParams c0{0.01};
    TruncPoissonParams c1{0.02};
    bool use_ancillary = true;

    bool operator==(const ModelParams&) const = default;
};

// Throws std::invalid_argument describing the first violated invariant.
// The c1 > c0 ordering is checked only when `require_rate_order` is set.
void validate(const ModelParams& p, bool require_rate_order = false);

inline constexpr int kParamsFormatVersion = 1;

// Versioned `key = value` text, one parameter per line, shortest
// round-trip decimal representation. Lines starting with '#' are comments.
void write_params(std::ostream& out, const ModelParams& p);
ModelParams read_params(std::istream& in);

std::string_view to_string(Pi0Mode m);
std::string_view to_string(DensityRoles r);
Pi0Mode parse_pi0_mode(std::string_view s);
DensityRoles parse_density_roles(std::string_view s);

}  // namespace nestmix
