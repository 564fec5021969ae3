#pragma once
// Maximum-likelihood estimation of the nested protein/peptide mixture by EM,
// with decoy-informed or reference-based initialization and multi-start.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nestmix/ingestion.hpp"
#include "nestmix/model_params.hpp"

namespace nestmix {

// Raised when no valid starting point can be built from the data.
class InitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double log_sum_exp(double a, double b) noexcept;

// log of the incorrect (j = 0) and correct (j = 1) per-peptide terms:
// log f_j(score), plus log f_j^NTT(ntt) + log f_j^NMC(nmc) when ancillary
// features are enabled.
struct ComponentLogDensities {
    double incorrect = 0.0;
    double correct = 0.0;
};

ComponentLogDensities peptide_component_log_densities(const PeptideObservation& pep, const ModelParams& params);

// log[pi0* g0 h0] and log[(1 - pi0*) g1 h1] for one protein.
struct ProteinLogTerms {
    double absent = 0.0;
    double present = 0.0;
};

ProteinLogTerms protein_log_mixture_terms(const ProteinRecord& protein, const ModelParams& params);

double log_likelihood(std::span<const ProteinRecord> data, const ModelParams& params, int threads = 1);

// Posterior expectations given the current parameters. Peptide i of
// protein k lives at offsets[k] + i in the flat peptide arrays.
struct Responsibilities {
    std::vector<double> t_hat;   // Pr(protein present | data)
    std::vector<std::size_t> offsets;
    std::vector<double> i0_hat;  // Pr(peptide correct | protein absent, score)
    std::vector<double> i1_hat;  // Pr(peptide correct | protein present, score)

    double i0(std::size_t k, std::size_t i) const { return i0_hat[offsets[k] + i]; }
    double i1(std::size_t k, std::size_t i) const { return i1_hat[offsets[k] + i]; }
};

Responsibilities e_step(std::span<const ProteinRecord> data, const ModelParams& params, int threads = 1);

struct MStepOptions {
    Pi0Mode pi0_mode = Pi0Mode::fixed;
    double multinomial_pseudocount = 0.5;
};

// Closed-form mixing proportions and multinomials, weighted fits for the
// score densities (family taken from params_prev, gamma shift carried over)
// and for the two count rates. Boundary solutions for a rate are appended
// to `warnings` when given.
ModelParams m_step(std::span<const ProteinRecord> data, const Responsibilities& resp, const ModelParams& params_prev,
                   const MStepOptions& options, std::vector<std::string>* warnings = nullptr);

// Dirichlet log-prior matching the multinomial pseudocounts; zero when the
// ancillary features are off or the pseudocount is zero. EM maximizes
// log_likelihood + this term.
double multinomial_log_prior(const ModelParams& params, double pseudocount);

struct InitOptions {
    DensityRoles roles = DensityRoles::real;
    bool use_ancillary = true;
    Pi0Mode pi0_mode = Pi0Mode::fixed;
    double gamma_epsilon = 0.1;  // gamma shift = min score - epsilon
    double multinomial_pseudocount = 0.5;
};

// Incorrect-peptide parameters from decoy proteins, correct-peptide
// parameters from target moments, random c1/c0 ratio in [1.5, 3] and random
// mixing proportions. Throws InitError without both decoys and targets.
ModelParams initialize_from_decoys(std::span<const ProteinRecord> data, std::uint64_t seed,
                                   const InitOptions& options);

// Random start near a reference parameter set: every free parameter is
// perturbed by a relative factor in [1 - jitter, 1 + jitter]; gamma shift and
// multinomials are kept.
ModelParams initialize_near(const ModelParams& reference, std::uint64_t seed, double jitter, Pi0Mode pi0_mode);

struct FitConfig {
    int n_restarts = 10;
    double tol = 1e-3;
    int max_iter = 5000;
    std::uint64_t seed = 0;
    Pi0Mode pi0_mode = Pi0Mode::fixed;
    DensityRoles roles = DensityRoles::real;
    bool use_ancillary = true;
    double multinomial_pseudocount = 0.5;
    double gamma_epsilon = 0.1;
    int threads = 1;
    // When set, restarts start near these parameters instead of from decoys.
    std::optional<ModelParams> init_reference;
    double init_jitter = 0.1;
};

struct RestartReport {
    int index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct FitResult {
    ModelParams params;
    double log_likelihood = 0.0;
    int n_iterations = 0;
    int n_restarts = 0;
    bool converged = false;
    // Objective after initialization and after every iteration:
    // log-likelihood plus multinomial_log_prior (which is zero unless
    // ancillary features are on with a positive pseudocount).
    std::vector<double> trace;
    std::vector<RestartReport> restarts;
    int best_restart = -1;
    std::vector<std::string> warnings;
};

// One EM run from `initial`. Throws FitError if the run collapses (sum of
// protein presence posteriors below 1e-6 N) or a fitter fails.
FitResult run_em(std::span<const ProteinRecord> data, const ModelParams& initial, const FitConfig& config);

// Multi-start EM; returns the restart with the highest final log-likelihood.
FitResult fit(std::span<const ProteinRecord> data, const FitConfig& config);

// ---------------------------------------------------------------------------
// Peptide-only two-component mixture (no protein structure, equal count
// model for both classes): the PeptideProphet-style baseline.

struct PeptideMixtureParams {
    double pi_incorrect = 0.5;
    ScoreDensity f0 = NormalParams{};
    ScoreDensity f1 = ShiftedGammaParams{};
};

struct PeptideMixtureFit {
    PeptideMixtureParams params;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

double peptide_mixture_log_likelihood(std::span<const double> scores, const PeptideMixtureParams& params);
std::vector<double> peptide_mixture_posteriors(std::span<const double> scores, const PeptideMixtureParams& params);
PeptideMixtureFit fit_peptide_mixture(std::span<const double> scores, const PeptideMixtureParams& initial,
                                      double tol = 1e-3, int max_iter = 5000);

}  // namespace nestmix
