#pragma once
// Subcommand implementations behind the `nestmix` executable. Each returns
// the process exit code: 0 success, 2 input error, 3 fit failure.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "nestmix/ingestion.hpp"
#include "nestmix/model_params.hpp"

namespace nestmix {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitFit = 3 };

struct RunConfig {
    std::string subcommand;
    std::filesystem::path out = ".";
    std::optional<std::uint64_t> seed;
    int threads = 1;

    // fit
    std::filesystem::path psms;
    std::filesystem::path lengths;
    std::optional<std::filesystem::path> groups;
    std::optional<std::filesystem::path> init;
    int restarts = 10;
    double tol = 1e-3;
    int max_iter = 5000;
    Pi0Mode pi0_mode = Pi0Mode::fixed;
    DensityRoles roles = DensityRoles::real;
    bool ancillary = true;
    std::string decoy_prefix = kDefaultDecoyPrefix;
    double two_peptide_threshold = 0.9;

    // simulate
    std::optional<std::string> preset;
    std::optional<std::filesystem::path> scenario;

    // evaluate
    std::optional<std::filesystem::path> protein_scores;
    std::optional<std::filesystem::path> peptide_scores;
    std::optional<std::filesystem::path> truth_dir;
    bool decoy_mode = false;
    bool by_group = false;
    int n_bins = 10;

    // baseline
    std::filesystem::path scores;
    std::string rule = "product";
    std::string column = "marginal";
};

// "# nestmix <version> <subcommand> <flags...>\n", flags in canonical order.
std::string output_header(const RunConfig& cfg);

int cmd_fit(const RunConfig& cfg, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, std::ostream& err);
int cmd_evaluate(const RunConfig& cfg, std::ostream& err);
int cmd_baseline(const RunConfig& cfg, std::ostream& err);

}  // namespace nestmix
