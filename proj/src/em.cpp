#include "nestmix/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "nestmix/parallel.hpp"
#include "nestmix/random.hpp"

namespace nestmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// log(1 - p) without cancellation for small p.
double safe_log1m(double p) { return p < 1.0 ? std::log1p(-p) : kNegInf; }

struct Mixing {
    double log_pi0_star, log_pi1_star;
    double log_pi0, log_1m_pi0;
    double log_pi1, log_1m_pi1;
    bool pi0_is_one;
};

Mixing mixing_logs(const ModelParams& p) {
    return {safe_log(p.pi0_star), safe_log1m(p.pi0_star), safe_log(p.pi0), safe_log1m(p.pi0),
            safe_log(p.pi1),      safe_log1m(p.pi1),      p.pi0 >= 1.0};
}

// Per-protein evaluation shared by the likelihood, the E-step and inference.
// Fills the conditional correctness posteriors when spans are non-empty.
ProteinLogTerms evaluate_protein(const ProteinRecord& protein, const ModelParams& params, const Mixing& mix,
                                 std::span<double> i0_out, std::span<double> i1_out) {
    double log_g0 = 0.0;
    double log_g1 = 0.0;
    const bool want = !i1_out.empty();
    for (std::size_t i = 0; i < protein.peptides.size(); ++i) {
        const auto d = peptide_component_log_densities(protein.peptides[i], params);

        const double inc1 = mix.log_pi1 + d.incorrect;
        const double cor1 = mix.log_1m_pi1 + d.correct;
        const double m1 = log_sum_exp(inc1, cor1);
        log_g1 += m1;

        double m0, i0 = 0.0;
        if (mix.pi0_is_one) {
            m0 = d.incorrect;
        } else {
            const double inc0 = mix.log_pi0 + d.incorrect;
            const double cor0 = mix.log_1m_pi0 + d.correct;
            m0 = log_sum_exp(inc0, cor0);
            if (want) i0 = m0 == kNegInf ? 0.0 : std::exp(cor0 - m0);
        }
        log_g0 += m0;

        if (want) {
            i0_out[i] = i0;
            i1_out[i] = m1 == kNegInf ? 0.0 : std::exp(cor1 - m1);
        }
    }
    const auto n = static_cast<std::int64_t>(protein.peptides.size());
    ProteinLogTerms t;
    t.absent = mix.log_pi0_star + log_g0 + trunc_poisson_log_pmf(n, protein.length, params.c0);
    t.present = mix.log_pi1_star + log_g1 + trunc_poisson_log_pmf(n, protein.length, params.c1);
    return t;
}

double presence_posterior(const ProteinLogTerms& t) {
    const double total = log_sum_exp(t.absent, t.present);
    if (total == kNegInf) return 0.0;
    return std::exp(t.present - total);
}

double weighted_quantile_sorted(const std::vector<double>& sorted, double q) {
    // Linear interpolation between order statistics.
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScoreDensity moment_density(bool normal, std::span<const double> xs, double gamma_shift) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / n;
    if (!(var > 0.0)) throw InitError("initialization: target scores have zero variance");
    if (normal) return NormalParams{mean, std::sqrt(var)};
    const double m = mean - gamma_shift;
    return ShiftedGammaParams{m * m / var, var / m, gamma_shift};
}

}  // namespace

double log_sum_exp(double a, double b) noexcept {
    if (a < b) std::swap(a, b);
    if (a == kNegInf) return kNegInf;
    return a + std::log1p(std::exp(b - a));
}

ComponentLogDensities peptide_component_log_densities(const PeptideObservation& pep, const ModelParams& params) {
    ComponentLogDensities d{score_log_pdf(pep.score, params.f0), score_log_pdf(pep.score, params.f1)};
    if (params.use_ancillary) {
        d.incorrect += multinomial_log_pmf(pep.ntt, params.ntt0) + multinomial_log_pmf(pep.nmc_state, params.nmc0);
        d.correct += multinomial_log_pmf(pep.ntt, params.ntt1) + multinomial_log_pmf(pep.nmc_state, params.nmc1);
    }
    return d;
}

ProteinLogTerms protein_log_mixture_terms(const ProteinRecord& protein, const ModelParams& params) {
    return evaluate_protein(protein, params, mixing_logs(params), {}, {});
}

double log_likelihood(std::span<const ProteinRecord> data, const ModelParams& params, int threads) {
    const auto mix = mixing_logs(params);
    std::vector<double> per_protein(data.size());
    parallel_for(data.size(), threads, [&](std::size_t k) {
        const auto t = evaluate_protein(data[k], params, mix, {}, {});
        per_protein[k] = log_sum_exp(t.absent, t.present);
    });
    double ll = 0.0;
    for (double v : per_protein) ll += v;
    return ll;
}

Responsibilities e_step(std::span<const ProteinRecord> data, const ModelParams& params, int threads) {
    Responsibilities r;
    r.t_hat.resize(data.size());
    r.offsets.resize(data.size() + 1);
    r.offsets[0] = 0;
    for (std::size_t k = 0; k < data.size(); ++k) r.offsets[k + 1] = r.offsets[k] + data[k].peptides.size();
    r.i0_hat.assign(r.offsets.back(), 0.0);
    r.i1_hat.assign(r.offsets.back(), 0.0);

    const auto mix = mixing_logs(params);
    parallel_for(data.size(), threads, [&](std::size_t k) {
        const std::size_t n = data[k].peptides.size();
        std::span<double> i0(r.i0_hat.data() + r.offsets[k], n);
        std::span<double> i1(r.i1_hat.data() + r.offsets[k], n);
        r.t_hat[k] = presence_posterior(evaluate_protein(data[k], params, mix, i0, i1));
    });
    return r;
}

ModelParams m_step(std::span<const ProteinRecord> data, const Responsibilities& resp, const ModelParams& params_prev,
                   const MStepOptions& options, std::vector<std::string>* warnings) {
    const std::size_t n_pep = resp.offsets.back();
    std::vector<double> scores(n_pep), w_incorrect(n_pep), w_correct(n_pep);
    std::vector<int> ntt(n_pep), nmc(n_pep);
    std::vector<std::int64_t> counts(data.size()), lengths(data.size());
    std::vector<double> w_absent(data.size()), w_present(data.size());

    double sum_absent = 0.0;
    double absent_incorrect = 0.0, absent_total = 0.0;
    double present_incorrect = 0.0, present_total = 0.0;

    for (std::size_t k = 0; k < data.size(); ++k) {
        const double t = resp.t_hat[k];
        const auto& pro = data[k];
        const double n = static_cast<double>(pro.peptides.size());
        counts[k] = static_cast<std::int64_t>(pro.peptides.size());
        lengths[k] = pro.length;
        w_absent[k] = 1.0 - t;
        w_present[k] = t;
        sum_absent += 1.0 - t;
        absent_total += (1.0 - t) * n;
        present_total += t * n;

        double inc0 = 0.0, inc1 = 0.0;
        for (std::size_t i = 0; i < pro.peptides.size(); ++i) {
            const std::size_t j = resp.offsets[k] + i;
            const double i0 = resp.i0_hat[j];
            const double i1 = resp.i1_hat[j];
            inc0 += 1.0 - i0;
            inc1 += 1.0 - i1;
            scores[j] = pro.peptides[i].score;
            ntt[j] = pro.peptides[i].ntt;
            nmc[j] = pro.peptides[i].nmc_state;
            w_incorrect[j] = (1.0 - t) * (1.0 - i0) + t * (1.0 - i1);
            w_correct[j] = (1.0 - t) * i0 + t * i1;
        }
        absent_incorrect += (1.0 - t) * inc0;
        present_incorrect += t * inc1;
    }

    ModelParams next = params_prev;
    const double n_proteins = static_cast<double>(data.size());
    next.pi0_star = sum_absent / n_proteins;
    if (options.pi0_mode == Pi0Mode::free) {
        if (!(absent_total > 0.0)) throw FitError("m-step: no posterior weight on absent proteins");
        next.pi0 = absent_incorrect / absent_total;
    }
    if (!(present_total > 0.0)) throw FitError("m-step: no posterior weight on present proteins");
    next.pi1 = present_incorrect / present_total;

    next.f0 = fit_score_density(params_prev.f0, scores, w_incorrect);
    next.f1 = fit_score_density(params_prev.f1, scores, w_correct);

    if (params_prev.use_ancillary) {
        const double pc = options.multinomial_pseudocount;
        next.ntt0 = fit_multinomial_weighted(ntt, w_incorrect, pc);
        next.ntt1 = fit_multinomial_weighted(ntt, w_correct, pc);
        next.nmc0 = fit_multinomial_weighted(nmc, w_incorrect, pc);
        next.nmc1 = fit_multinomial_weighted(nmc, w_correct, pc);
    }

    // With every protein confidently present there is nothing to fit c0 on;
    // the previous value is kept.
    if (sum_absent > 0.0) {
        const auto c0 = fit_trunc_poisson_weighted(counts, lengths, w_absent);
        if (warnings && (c0.at_lower_bound || c0.at_upper_bound)) warnings->push_back("c0 estimate on search-bracket edge");
        next.c0 = c0.params;
    } else if (warnings) {
        warnings->push_back("no posterior weight on absent proteins; c0 kept");
    }
    const auto c1 = fit_trunc_poisson_weighted(counts, lengths, w_present);
    if (warnings && (c1.at_lower_bound || c1.at_upper_bound)) warnings->push_back("c1 estimate on search-bracket edge");
    next.c1 = c1.params;
    return next;
}

double multinomial_log_prior(const ModelParams& params, double pseudocount) {
    if (!params.use_ancillary || pseudocount == 0.0) return 0.0;
    double lp = 0.0;
    for (const auto* m : {&params.ntt0, &params.ntt1, &params.nmc0, &params.nmc1}) {
        for (double p : m->probs) lp += pseudocount * safe_log(p);
    }
    return lp;
}

ModelParams initialize_from_decoys(std::span<const ProteinRecord> data, std::uint64_t seed,
                                   const InitOptions& options) {
    std::vector<double> decoy_scores, target_scores, all_scores;
    std::vector<int> decoy_ntt, decoy_nmc;
    std::vector<std::int64_t> decoy_counts, decoy_lengths;
    for (const auto& pro : data) {
        if (pro.is_decoy) {
            decoy_counts.push_back(static_cast<std::int64_t>(pro.peptides.size()));
            decoy_lengths.push_back(pro.length);
        }
        for (const auto& pep : pro.peptides) {
            all_scores.push_back(pep.score);
            if (pro.is_decoy) {
                decoy_scores.push_back(pep.score);
                decoy_ntt.push_back(pep.ntt);
                decoy_nmc.push_back(pep.nmc_state);
            } else {
                target_scores.push_back(pep.score);
            }
        }
    }
    if (decoy_counts.empty()) {
        throw InitError("no decoy proteins in the data; supply explicit initial parameters instead (--init)");
    }
    if (decoy_counts.size() == data.size()) {
        throw InitError("no target proteins in the data; nothing to fit");
    }

    const double gamma_shift = *std::min_element(all_scores.begin(), all_scores.end()) - options.gamma_epsilon;
    const bool f0_normal = options.roles == DensityRoles::real;

    ModelParams p;
    p.use_ancillary = options.use_ancillary;
    const std::vector<double> ones(decoy_scores.size(), 1.0);
    p.f0 = f0_normal ? ScoreDensity{fit_normal_weighted(decoy_scores, ones)}
                     : ScoreDensity{fit_shifted_gamma_weighted(decoy_scores, ones, gamma_shift)};
    p.f1 = moment_density(!f0_normal, target_scores, gamma_shift);

    const double pc = options.multinomial_pseudocount;
    p.ntt0 = fit_multinomial_weighted(decoy_ntt, ones, pc);
    p.nmc0 = fit_multinomial_weighted(decoy_nmc, ones, pc);

    std::vector<double> sorted = target_scores;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = weighted_quantile_sorted(sorted, 0.10);
    std::vector<int> top_ntt, top_nmc;
    for (const auto& pro : data) {
        if (pro.is_decoy) continue;
        for (const auto& pep : pro.peptides) {
            if (pep.score > cutoff) {
                top_ntt.push_back(pep.ntt);
                top_nmc.push_back(pep.nmc_state);
            }
        }
    }
    const std::vector<double> top_ones(top_ntt.size(), 1.0);
    p.ntt1 = fit_multinomial_weighted(top_ntt, top_ones, pc);
    p.nmc1 = fit_multinomial_weighted(top_nmc, top_ones, pc);

    const std::vector<double> decoy_w(decoy_counts.size(), 1.0);
    p.c0 = fit_trunc_poisson_weighted(decoy_counts, decoy_lengths, decoy_w).params;

    Rng rng(seed);
    p.c1.rate_per_length = rng.uniform(1.5, 3.0) * p.c0.rate_per_length;
    p.pi0_star = rng.uniform();
    p.pi1 = rng.uniform();
    p.pi0 = options.pi0_mode == Pi0Mode::free ? rng.uniform(0.95, 1.0) : 1.0;
    return p;
}

ModelParams initialize_near(const ModelParams& reference, std::uint64_t seed, double jitter, Pi0Mode pi0_mode) {
    Rng rng(seed);
    auto scale = [&] { return rng.uniform(1.0 - jitter, 1.0 + jitter); };
    ModelParams p = reference;
    p.pi0_star = std::clamp(reference.pi0_star * scale(), 0.01, 0.99);
    p.pi1 = std::clamp(reference.pi1 * scale(), 0.01, 0.99);
    p.pi0 = pi0_mode == Pi0Mode::fixed ? 1.0 : std::clamp(reference.pi0 * scale(), 0.5, 1.0);
    for (auto* d : {&p.f0, &p.f1}) {
        if (auto* n = std::get_if<NormalParams>(d)) {
            n->mean += rng.uniform(-jitter, jitter) * n->sd;
            n->sd *= scale();
        } else {
            auto& g = std::get<ShiftedGammaParams>(*d);
            g.shape *= scale();
            g.scale *= scale();
        }
    }
    p.c0.rate_per_length *= scale();
    p.c1.rate_per_length *= scale();
    if (p.c1.rate_per_length <= p.c0.rate_per_length) p.c1.rate_per_length = 1.5 * p.c0.rate_per_length;
    return p;
}

FitResult run_em(std::span<const ProteinRecord> data, const ModelParams& initial, const FitConfig& config) {
    if (data.empty()) throw FitError("no proteins to fit");
    validate(initial);

    const MStepOptions mopt{config.pi0_mode, config.multinomial_pseudocount};
    const double pc = config.multinomial_pseudocount;
    const double n_proteins = static_cast<double>(data.size());

    FitResult out;
    out.n_restarts = 1;
    ModelParams params = initial;
    double objective = log_likelihood(data, params, config.threads) + multinomial_log_prior(params, pc);
    out.trace.push_back(objective);

    for (int it = 1; it <= config.max_iter; ++it) {
        const auto resp = e_step(data, params, config.threads);
        const double present_mass = std::accumulate(resp.t_hat.begin(), resp.t_hat.end(), 0.0);
        if (present_mass < 1e-6 * n_proteins) {
            throw FitError(fmt::format("restart collapsed: total presence posterior {} at iteration {}", present_mass, it));
        }
        std::vector<std::string> step_warnings;
        params = m_step(data, resp, params, mopt, &step_warnings);
        for (auto& w : step_warnings) {
            const auto msg = fmt::format("iteration {}: {}", it, w);
            if (std::find(out.warnings.begin(), out.warnings.end(), msg) == out.warnings.end()) {
                out.warnings.push_back(msg);
            }
        }

        const double next = log_likelihood(data, params, config.threads) + multinomial_log_prior(params, pc);
        if (!std::isfinite(next)) throw FitError(fmt::format("non-finite log-likelihood at iteration {}", it));
        out.trace.push_back(next);
        out.n_iterations = it;
        const double change = next - objective;
        if (change < -1e-8) {
            out.warnings.push_back(fmt::format("iteration {}: objective decreased by {}", it, -change));
        }
        objective = next;
        if (std::abs(change) < config.tol) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) out.warnings.push_back(fmt::format("did not converge within {} iterations", config.max_iter));
    if (params.c1.rate_per_length <= params.c0.rate_per_length) {
        out.warnings.push_back(fmt::format("fitted c1 ({}) does not exceed c0 ({})", params.c1.rate_per_length,
                                           params.c0.rate_per_length));
    }
    out.params = params;
    out.log_likelihood = log_likelihood(data, params, config.threads);
    return out;
}

FitResult fit(std::span<const ProteinRecord> data, const FitConfig& config) {
    if (data.empty()) throw FitError("no proteins to fit");
    if (config.n_restarts < 1) throw std::invalid_argument("n_restarts must be >= 1");
    if (!config.init_reference) {
        const bool any_decoy = std::any_of(data.begin(), data.end(), [](const auto& p) { return p.is_decoy; });
        if (!any_decoy) {
            throw InitError("no decoy proteins in the data; supply explicit initial parameters instead (--init)");
        }
    }

    const auto n = static_cast<std::size_t>(config.n_restarts);
    const int outer = std::min(config.threads, config.n_restarts);
    FitConfig inner = config;
    inner.threads = outer > 1 ? 1 : config.threads;

    std::vector<RestartReport> reports(n);
    std::vector<std::optional<FitResult>> results(n);
    parallel_for(n, outer, [&](std::size_t r) {
        auto& rep = reports[r];
        rep.index = static_cast<int>(r);
        rep.seed = derive_seed(config.seed, r);
        try {
            ModelParams start;
            if (config.init_reference) {
                start = initialize_near(*config.init_reference, rep.seed, config.init_jitter, config.pi0_mode);
                start.use_ancillary = config.use_ancillary;
            } else {
                start = initialize_from_decoys(
                    data, rep.seed,
                    {config.roles, config.use_ancillary, config.pi0_mode, config.gamma_epsilon,
                     config.multinomial_pseudocount});
            }
            auto res = run_em(data, start, inner);
            rep.ok = true;
            rep.log_likelihood = res.log_likelihood;
            rep.iterations = res.n_iterations;
            rep.converged = res.converged;
            rep.warnings = res.warnings;
            results[r] = std::move(res);
        } catch (const std::exception& e) {
            rep.ok = false;
            rep.error = e.what();
        }
    });

    int best = -1;
    for (std::size_t r = 0; r < n; ++r) {
        if (!reports[r].ok) continue;
        if (best < 0 || reports[r].log_likelihood > reports[static_cast<std::size_t>(best)].log_likelihood) {
            best = static_cast<int>(r);
        }
    }
    if (best < 0) {
        std::string msg = "all EM restarts failed:";
        for (const auto& rep : reports) msg += fmt::format(" [restart {}: {}]", rep.index, rep.error);
        throw FitError(msg);
    }

    FitResult out = std::move(*results[static_cast<std::size_t>(best)]);
    out.n_restarts = config.n_restarts;
    out.best_restart = best;
    out.restarts = std::move(reports);
    return out;
}

double peptide_mixture_log_likelihood(std::span<const double> scores, const PeptideMixtureParams& params) {
    const double l0 = safe_log(params.pi_incorrect);
    const double l1 = safe_log1m(params.pi_incorrect);
    double ll = 0.0;
    for (double x : scores) ll += log_sum_exp(l0 + score_log_pdf(x, params.f0), l1 + score_log_pdf(x, params.f1));
    return ll;
}

std::vector<double> peptide_mixture_posteriors(std::span<const double> scores, const PeptideMixtureParams& params) {
    const double l0 = safe_log(params.pi_incorrect);
    const double l1 = safe_log1m(params.pi_incorrect);
    std::vector<double> post(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double a = l0 + score_log_pdf(scores[i], params.f0);
        const double b = l1 + score_log_pdf(scores[i], params.f1);
        const double m = log_sum_exp(a, b);
        post[i] = m == kNegInf ? 0.0 : std::exp(b - m);
    }
    return post;
}

PeptideMixtureFit fit_peptide_mixture(std::span<const double> scores, const PeptideMixtureParams& initial, double tol,
                                      int max_iter) {
    if (scores.empty()) throw FitError("no peptide scores to fit");
    PeptideMixtureFit out;
    out.params = initial;
    double ll = peptide_mixture_log_likelihood(scores, out.params);
    std::vector<double> w0(scores.size());
    for (int it = 1; it <= max_iter; ++it) {
        const auto post = peptide_mixture_posteriors(scores, out.params);
        double incorrect = 0.0;
        for (std::size_t i = 0; i < post.size(); ++i) {
            w0[i] = 1.0 - post[i];
            incorrect += w0[i];
        }
        out.params.pi_incorrect = incorrect / static_cast<double>(scores.size());
        out.params.f0 = fit_score_density(out.params.f0, scores, w0);
        out.params.f1 = fit_score_density(out.params.f1, scores, post);
        const double next = peptide_mixture_log_likelihood(scores, out.params);
        out.iterations = it;
        const double change = next - ll;
        ll = next;
        if (std::abs(change) < tol) {
            out.converged = true;
            break;
        }
    }
    out.log_likelihood = ll;
    return out;
}

}  // namespace nestmix
