#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "nestmix/cli.hpp"
#include "nestmix/parallel.hpp"

using namespace nestmix;

namespace {

void add_shared(CLI::App* app, RunConfig& cfg) {
    app->add_option("--seed", cfg.seed, "Random seed (required for fit and simulate)");
    app->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    app->add_option("--threads", cfg.threads, "Worker threads; results do not depend on this")->capture_default_str();
}

void add_model_flags(CLI::App* app, RunConfig& cfg, std::string& pi0, std::string& roles, bool& no_ancillary) {
    app->add_option("--restarts", cfg.restarts, "Random restarts")->capture_default_str();
    app->add_option("--tol", cfg.tol, "Convergence tolerance on the log-likelihood change")->capture_default_str();
    app->add_option("--max-iter", cfg.max_iter, "Iteration cap per restart")->capture_default_str();
    app->add_option("--pi0", pi0, "Incorrect proportion on absent proteins: fixed (=1) or free")
        ->check(CLI::IsMember({"fixed", "free"}))
        ->capture_default_str();
    app->add_option("--density-roles", roles,
                    "Score families: real (f0 normal, f1 gamma) or sim (f0 gamma, f1 normal)")
        ->check(CLI::IsMember({"real", "sim"}))
        ->capture_default_str();
    app->add_flag("--no-ancillary", no_ancillary, "Ignore NTT/NMC features");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nested mixture model for joint protein and peptide identification"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    RunConfig cfg;
    cfg.threads = default_thread_count();
    std::string pi0 = "fixed", roles = "real";
    bool no_ancillary = false;

    auto* fit = app.add_subcommand("fit", "Fit the model to a PSM table and write protein/peptide probabilities");
    add_shared(fit, cfg);
    add_model_flags(fit, cfg, pi0, roles, no_ancillary);
    fit->add_option("--psms", cfg.psms, "PSM table (TSV)")->required();
    fit->add_option("--lengths", cfg.lengths, "Protein lengths (TSV: protein_id length)")->required();
    fit->add_option("--groups", cfg.groups, "Protein groups (TSV: protein_id group_id)");
    fit->add_option("--init", cfg.init, "Start restarts near these parameters instead of from decoys");
    fit->add_option("--decoy-prefix", cfg.decoy_prefix, "Protein-id prefix marking decoys")->capture_default_str();
    fit->add_option("--two-peptide-threshold", cfg.two_peptide_threshold,
                    "Peptide probability a peptide must reach for the two-peptide rule")
        ->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Draw a labeled dataset from a simulation scenario");
    add_shared(sim, cfg);
    sim->add_option("--preset", cfg.preset, "S1, S2 or S3 (default S1)");
    sim->add_option("--scenario", cfg.scenario, "key = value overrides applied on top of the preset");

    auto* eval = app.add_subcommand(
        "evaluate",
        "Tradeoff, FDR and calibration CSVs for every probability column. A call is made when p > threshold (strict).");
    add_shared(eval, cfg);
    eval->add_option("--proteins", cfg.protein_scores, "Protein score table");
    eval->add_option("--peptides", cfg.peptide_scores, "Peptide score table");
    eval->add_option("--truth-dir", cfg.truth_dir, "Directory with truth_proteins.tsv / truth_peptides.tsv");
    eval->add_flag("--decoy", cfg.decoy_mode, "Label by decoy prefix instead of truth files");
    eval->add_option("--decoy-prefix", cfg.decoy_prefix, "Protein-id prefix marking decoys")->capture_default_str();
    eval->add_flag("--by-group", cfg.by_group, "Also evaluate group-level maxima");
    eval->add_option("--bins", cfg.n_bins, "Calibration bins")->capture_default_str();

    auto* base = app.add_subcommand("baseline", "Protein scores from a peptide probability column");
    add_shared(base, cfg);
    base->add_option("--scores", cfg.scores, "Peptide score table")->required();
    base->add_option("--rule", cfg.rule, "product or two-peptide")
        ->check(CLI::IsMember({"product", "two-peptide"}))
        ->capture_default_str();
    base->add_option("--column", cfg.column, "Peptide probability column")->capture_default_str();
    base->add_option("--threshold", cfg.two_peptide_threshold,
                     "Two-peptide rule: a peptide counts when p >= threshold")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    cfg.pi0_mode = parse_pi0_mode(pi0);
    cfg.roles = parse_density_roles(roles);
    cfg.ancillary = !no_ancillary;
    if (cfg.threads < 1) cfg.threads = 1;

    if (fit->parsed()) {
        cfg.subcommand = "fit";
        return cmd_fit(cfg, std::cerr);
    }
    if (sim->parsed()) {
        cfg.subcommand = "simulate";
        return cmd_simulate(cfg, std::cerr);
    }
    if (eval->parsed()) {
        cfg.subcommand = "evaluate";
        return cmd_evaluate(cfg, std::cerr);
    }
    cfg.subcommand = "baseline";
    return cmd_baseline(cfg, std::cerr);
}
