// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "nestmix/cli.hpp"
#include "nestmix/em.hpp"
#include "nestmix/evaluation.hpp"
#include "nestmix/inference.hpp"
#include "nestmix/simulator.hpp"
#include "oracles.hpp"

using namespace nestmix;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " -- " << detail << std::endl;
    if (!ok) ++failures;
}

struct ScenarioRun {
    SimScenario scenario;
    LabeledDataset data;
    FitResult fit;
};

ScenarioRun run_scenario(const std::string& preset, std::uint64_t sim_seed, std::uint64_t fit_seed) {
    ScenarioRun r;
    r.scenario = scenario_preset(preset);
    r.data = simulate(r.scenario, sim_seed);
    FitConfig cfg;
    cfg.n_restarts = 10;
    cfg.seed = fit_seed;
    cfg.roles = DensityRoles::sim;
    cfg.use_ancillary = false;
    cfg.init_reference = scenario_model_params(r.scenario);
    r.fit = fit(r.data.proteins, cfg);
    return r;
}

std::string describe_fit(const ModelParams& p) {
    return fmt::format("pi0*={:.4f} pi1={:.4f} c0={:.5f} c1={:.5f} f0={} f1={}", p.pi0_star, p.pi1,
                       p.c0.rate_per_length, p.c1.rate_per_length, describe(p.f0), describe(p.f1));
}

// Flattened peptide-level vectors aligned with the simulation truth.
struct PeptideLevel {
    std::vector<double> nested, scores;
    std::vector<char> correct;
};

PeptideLevel peptide_level(const ScenarioRun& r) {
    PeptideLevel out;
    const auto resp = e_step(r.data.proteins, r.fit.params);
    for (std::size_t k = 0; k < r.data.proteins.size(); ++k) {
        for (std::size_t i = 0; i < r.data.proteins[k].peptides.size(); ++i) {
            out.nested.push_back(resp.t_hat[k] * resp.i1(k, i));
            out.scores.push_back(r.data.proteins[k].peptides[i].score);
            out.correct.push_back(r.data.truth_peptide[k][i] ? 1 : 0);
        }
    }
    return out;
}

void criterion_1(const ScenarioRun& s1) {
    const auto& p = s1.fit.params;
    const auto* f0 = std::get_if<ShiftedGammaParams>(&p.f0);
    const auto* f1 = std::get_if<NormalParams>(&p.f1);
    const bool ok = f0 && f1 && std::abs(p.pi0_star - 0.88) <= 0.03 && std::abs(p.c0.rate_per_length - 0.018) <= 0.004 &&
                    std::abs(p.c1.rate_per_length - 0.033) <= 0.005 && std::abs(p.pi1 - 0.58) <= 0.06 &&
                    std::abs(f1->mean - 3.63) <= 0.2 && std::abs(f1->sd - 2.07) <= 0.2 &&
                    std::abs(f0->shape - 86.46) <= 0.1 * 86.46;
    report(1, "S1 parameter recovery", ok, describe_fit(p));
}

void criterion_2(const ScenarioRun& s2, const ScenarioRun& s3) {
    const bool ok2 = std::abs(s2.fit.params.pi0_star - 0.5) <= 0.07;
    const bool ok3 = s3.fit.params.pi1 >= 0.32 && s3.fit.params.pi1 <= 0.48;
    report(2, "S2 and S3 parameter recovery", ok2 && ok3,
           fmt::format("S2 pi0*={:.4f} (target 0.5 +- 0.07); S3 pi1={:.4f} (target [0.32, 0.48])",
                       s2.fit.params.pi0_star, s3.fit.params.pi1));
}

void criterion_3() {
    int runs = 0, failed_runs = 0;
    double worst = 0.0;
    std::string errors;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto d = oracle::random_small_dataset(derive_seed(3, s), 200);
        // Default pseudocount (penalized objective) and pseudocount 0 (plain log-likelihood).
        for (double pc : {0.5, 0.0}) {
            FitConfig cfg;
            cfg.pi0_mode = d.pi0_mode;
            cfg.multinomial_pseudocount = pc;
            cfg.tol = 1e-9;
            cfg.max_iter = 500;
            ++runs;
            try {
                const auto res = run_em(d.proteins, d.start, cfg);
                for (std::size_t i = 1; i < res.trace.size(); ++i) {
                    worst = std::min(worst, res.trace[i] - res.trace[i - 1]);
                }
            } catch (const std::exception& e) {
                ++failed_runs;
                errors += fmt::format(" [dataset {} pc {}: {}]", s, pc, e.what());
            }
        }
    }
    report(3, "EM monotonicity on 50 random datasets", worst >= -1e-8 && failed_runs == 0,
           fmt::format("{} runs, most negative step {:.3g}, {} runs failed{}", runs, worst, failed_runs, errors));
}

void criterion_4() {
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto inst = oracle::random_instance(derive_seed(4, s), 5, 3, s % 4 == 0);
        const auto resp = e_step(inst.proteins, inst.params);
        for (std::size_t k = 0; k < inst.proteins.size(); ++k) {
            const auto ref = oracle::enumerate_protein(inst.proteins[k], inst.params);
            worst = std::max(worst, std::abs(resp.t_hat[k] - ref.t_hat));
            for (std::size_t i = 0; i < ref.i1.size(); ++i) {
                worst = std::max(worst, std::abs(resp.i0(k, i) - ref.i0[i]));
                worst = std::max(worst, std::abs(resp.i1(k, i) - ref.i1[i]));
            }
            ++compared;
        }
    }
    report(4, "E-step equals brute-force enumeration", worst <= 1e-10,
           fmt::format("200 instances, {} proteins, max abs difference {:.3g}", compared, worst));
}

void criterion_5(const ScenarioRun& s1) {
    const auto pl = peptide_level(s1);
    bool ok = true;
    std::string detail;
    for (const auto& b : calibration_table(pl.nested, pl.correct, 10)) {
        if (b.count < 100) continue;
        const double diff = std::abs(b.mean_assigned_prob - b.empirical_fraction_correct);
        ok = ok && diff <= 0.1;
        detail += fmt::format(" [{:.1f},{:.1f}] n={} diff={:.3f};", b.lo, b.hi, b.count, diff);
    }
    report(5, "S1 peptide calibration", ok, "bins with count >= 100:" + detail);
}

void criterion_6(const ScenarioRun& s2) {
    const auto tables = score_dataset(s2.data.proteins, s2.fit.params);
    std::map<std::string, bool> present;
    for (std::size_t k = 0; k < s2.data.proteins.size(); ++k) present[s2.data.proteins[k].id] = s2.data.truth_protein[k];
    std::vector<double> nested, product;
    std::vector<char> labels;
    for (const auto& row : tables.proteins) {
        nested.push_back(row.prob_nested);
        product.push_back(row.prob_product);
        labels.push_back(present.at(row.protein_id) ? 1 : 0);
    }
    bool ok = true;
    std::string detail;
    for (std::size_t budget : {10, 25, 50}) {
        const auto a = true_calls_at_false_count(nested, labels, budget);
        const auto b = true_calls_at_false_count(product, labels, budget);
        ok = ok && a >= b;
        detail += fmt::format(" false<={}: nested {} vs product {};", budget, a, b);
    }
    report(6, "S2 nested vs product rule (proteins)", ok, detail);
}

void criterion_7(const std::vector<const ScenarioRun*>& runs) {
    bool ok = true;
    std::string detail;
    for (const auto* r : runs) {
        const auto pl = peptide_level(*r);
        // Peptide-only two-component mixture, started from the generating densities.
        const PeptideMixtureParams init{0.7, r->scenario.f0, r->scenario.f1};
        const auto base = fit_peptide_mixture(pl.scores, init);
        const auto base_probs = peptide_mixture_posteriors(pl.scores, base.params);
        detail += " " + r->scenario.name + ":";
        for (std::size_t budget : {50, 100, 200}) {
            const auto a = true_calls_at_false_count(pl.nested, pl.correct, budget);
            const auto b = true_calls_at_false_count(base_probs, pl.correct, budget);
            const long gain = static_cast<long>(a) - static_cast<long>(b);
            ok = ok && gain >= 50;
            detail += fmt::format(" false<={} +{}", budget, gain);
        }
        detail += ";";
    }
    report(7, "peptide gain over the peptide-only mixture", ok, "nested minus baseline true calls:" + detail);
}

void criterion_8() {
    Rng rng(8);
    int checks = 0, failed = 0;
    std::string failures_seen;
    auto record = [&](bool ok, const std::string& what, int fixture) {
        ++checks;
        if (!ok) {
            ++failed;
            failures_seen += fmt::format(" [{} fixture {}]", what, fixture);
        }
    };
    using Objective = std::function<double(const std::vector<double>&)>;
    for (int fx = 0; fx < 20; ++fx) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(30, 400));
        std::vector<double> w(n), x(n);
        for (auto& v : w) v = rng.bernoulli(0.1) ? 0.0 : rng.uniform();

        const double mu = rng.uniform(-5, 5), sigma = rng.uniform(0.3, 4);
        for (auto& v : x) v = rng.normal(mu, sigma);
        const auto np = fit_normal_weighted(x, w);
        const Objective nf = [&](const std::vector<double>& t) { return weighted_normal_loglik(x, w, {t[0], t[1]}); };
        record(oracle::relative_gradient(nf, {np.mean, np.sd}) < 1e-6, "normal gradient", fx);
        record(oracle::dominates_perturbations(nf, {np.mean, np.sd}, rng), "normal dominance", fx);

        const double shift = rng.uniform(-10, 0), shape = rng.uniform(1.2, 120), scale = rng.uniform(0.02, 3);
        for (auto& v : x) v = shift + rng.gamma(shape, scale);
        const auto gp = fit_shifted_gamma_weighted(x, w, shift);
        const Objective gf = [&](const std::vector<double>& t) {
            return weighted_gamma_loglik(x, w, {t[0], t[1], shift});
        };
        record(oracle::relative_gradient(gf, {gp.shape, gp.scale}) < 1e-6, "gamma gradient", fx);
        record(oracle::dominates_perturbations(gf, {gp.shape, gp.scale}, rng), "gamma dominance", fx);

        std::vector<std::int64_t> ns(n), ls(n);
        const double c = rng.uniform(0.001, 0.05);
        for (std::size_t k = 0; k < n; ++k) {
            ls[k] = rng.uniform_int(30, 3000);
            ns[k] = rng.zero_truncated_poisson(c * static_cast<double>(ls[k]));
        }
        const auto cp = fit_trunc_poisson_weighted(ns, ls, w);
        const Objective cf = [&](const std::vector<double>& t) { return weighted_trunc_poisson_loglik(ns, ls, w, {t[0]}); };
        record(!cp.at_lower_bound && !cp.at_upper_bound, "rate interior", fx);
        record(oracle::relative_gradient(cf, {cp.params.rate_per_length}) < 1e-6, "rate gradient", fx);
        record(oracle::dominates_perturbations(cf, {cp.params.rate_per_length}, rng), "rate dominance", fx);

        // Multinomial MAP on the simplex: stationarity means the Lagrangian
        // gradient (count_s + pc) / p_s is the same for every state.
        std::vector<int> states(n);
        for (auto& s : states) s = static_cast<int>(rng.uniform_int(0, 2));
        const double pc = 0.5;
        const auto mp = fit_multinomial_weighted(states, w, pc);
        std::array<double, 3> counts{pc, pc, pc};
        for (std::size_t i = 0; i < n; ++i) counts[static_cast<std::size_t>(states[i])] += w[i];
        std::array<double, 3> g{};
        for (std::size_t s = 0; s < 3; ++s) g[s] = counts[s] / mp.probs[s];
        const double spread = (*std::max_element(g.begin(), g.end()) - *std::min_element(g.begin(), g.end())) / g[0];
        record(spread < 1e-6, "multinomial stationarity", fx);
        const Objective mf = [&](const std::vector<double>& t) {
            double v = 0.0;
            for (std::size_t s = 0; s < 3; ++s) v += counts[s] * std::log(t[s]);
            return v;
        };
        const auto normalize = [](std::vector<double>& t) {
            const double total = t[0] + t[1] + t[2];
            for (auto& v : t) v /= total;
        };
        record(oracle::dominates_perturbations(mf, {mp.probs[0], mp.probs[1], mp.probs[2]}, rng, 64, normalize),
               "multinomial dominance", fx);
    }
    report(8, "weighted fitters: stationarity and local dominance", failed == 0,
           fmt::format("20 fixtures, {} checks, {} failed{}", checks, failed, failures_seen));
}

void criterion_9() {
    bool ok = true;
    std::string detail;
    for (double lambda : {0.01, 1.0, 9.0, 100.0}) {
        const int n_max = static_cast<int>(lambda + 40.0 * std::sqrt(lambda) + 60.0);
        double total = 0.0;
        for (int n = 1; n <= n_max; ++n) total += std::exp(trunc_poisson_log_pmf(n, 1, {lambda}));
        ok = ok && total >= 1.0 - 1e-10;
        detail += fmt::format(" lambda={} sum={:.15f};", lambda, total);
    }
    report(9, "truncated Poisson normalization", ok, detail);
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = s.str();
    }
    return files;
}

std::string drop_header_lines(const std::string& text) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0 || line.rfind("{\"header\"", 0) == 0) continue;
        out += line + '\n';
    }
    return out;
}

void criterion_10() {
    const auto root = fs::temp_directory_path() / "nestmix_acceptance_determinism";
    auto pipeline = [&](int threads) {
        fs::remove_all(root);
        fs::create_directories(root);
        std::ostringstream err;
        RunConfig sim;
        sim.subcommand = "simulate";
        sim.preset = "S2";
        sim.seed = 10;
        sim.threads = threads;
        sim.out = root / "data";
        RunConfig fitc;
        fitc.subcommand = "fit";
        fitc.psms = sim.out / "psms.tsv";
        fitc.lengths = sim.out / "lengths.tsv";
        fitc.init = sim.out / "scenario_params.txt";
        fitc.roles = DensityRoles::sim;
        fitc.ancillary = false;
        fitc.seed = 11;
        fitc.threads = threads;
        fitc.out = root / "fit";
        RunConfig ev;
        ev.subcommand = "evaluate";
        ev.protein_scores = fitc.out / "proteins.tsv";
        ev.peptide_scores = fitc.out / "peptides.tsv";
        ev.truth_dir = sim.out;
        ev.threads = threads;
        ev.out = root / "eval";
        RunConfig base;
        base.subcommand = "baseline";
        base.scores = fitc.out / "peptides.tsv";
        base.threads = threads;
        base.out = root / "base";
        const int rc = cmd_simulate(sim, err) | cmd_fit(fitc, err) | cmd_evaluate(ev, err) | cmd_baseline(base, err);
        if (rc != 0) throw std::runtime_error("pipeline failed: " + err.str());
        return snapshot(root);
    };
    try {
        const auto a = pipeline(1);
        const auto b = pipeline(1);
        const auto c = pipeline(3);
        fs::remove_all(root);
        std::size_t differing = 0, differing_threads = 0;
        for (const auto& [name, bytes] : a) {
            const auto it = b.find(name);
            if (it == b.end() || it->second != bytes) ++differing;
            const auto jt = c.find(name);
            if (jt == c.end() || drop_header_lines(jt->second) != drop_header_lines(bytes)) ++differing_threads;
        }
        const bool ok = a.size() == b.size() && differing == 0 && differing_threads == 0 && !a.empty();
        report(10, "byte-identical end-to-end reruns", ok,
               fmt::format("{} files; {} differ between identical runs; {} differ (ignoring headers) with 3 threads",
                           a.size(), differing, differing_threads));
    } catch (const std::exception& e) {
        report(10, "byte-identical end-to-end reruns", false, e.what());
    }
}

}  // namespace

int main() {
    std::cout << "nestmix acceptance suite" << std::endl;
    try {
        const auto s1 = run_scenario("S1", 1, 101);
        const auto s2 = run_scenario("S2", 2, 102);
        const auto s3 = run_scenario("S3", 3, 103);
        criterion_1(s1);
        criterion_2(s2, s3);
        criterion_3();
        criterion_4();
        criterion_5(s1);
        criterion_6(s2);
        criterion_7({&s1, &s2, &s3});
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance suite aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : fmt::format("{} CRITERIA FAILED", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
