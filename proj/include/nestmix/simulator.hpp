#pragma once
// Labeled synthetic datasets drawn from the nested mixture generative model.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nestmix/ingestion.hpp"
#include "nestmix/model_params.hpp"

namespace nestmix {

// Per-present-protein incorrect-peptide proportion.
struct FixedPi1 {
    double value = 0.58;
};
struct UniformPi1 {
    double lo = 0.0;
    double hi = 0.8;
};
using Pi1Spec = std::variant<FixedPi1, UniformPi1>;

// Protein lengths: exponential with a common mean, or uniform integer ranges
// keyed by presence. Exponential draws are rounded up to an integer >= 1.
struct ExponentialLengths {
    double mean = 500.0;
};
struct UniformLengthsByPresence {
    std::int64_t present_lo = 100, present_hi = 200;
    std::int64_t absent_lo = 1000, absent_hi = 2000;
};
using LengthSpec = std::variant<ExponentialLengths, UniformLengthsByPresence>;

struct SimScenario {
    std::string name = "custom";
    int n_proteins = 2000;
    double pi0_star = 0.88;
    Pi1Spec pi1 = FixedPi1{};
    LengthSpec lengths = ExponentialLengths{};
    double c0 = 0.018;
    double c1 = 0.033;
    ScoreDensity f0 = ShiftedGammaParams{86.46, 0.093, -8.18};
    ScoreDensity f1 = NormalParams{3.63, 2.07};
    // Fraction of absent-protein peptide scores drawn from f1 (still labeled
    // incorrect); equals 1 - pi0.
    double contamination_rate = 0.0;
    // Test hook: when false, present proteins may end up with no correct peptide.
    bool enforce_correct_peptide = true;

    double pi0() const noexcept { return 1.0 - contamination_rate; }
};

// Throws std::invalid_argument on a violated invariant.
void validate(const SimScenario& s);

// S1, S2 or S3; throws std::invalid_argument for other names.
SimScenario scenario_preset(std::string_view name);

// `key = value` overrides applied on top of `base`. Keys: name, n_proteins,
// pi0_star, pi0, contamination_rate, pi1 (number or `uniform lo hi`),
// lengths (`exponential mean` or `uniform plo phi alo ahi`), c0, c1,
// f0 / f1 (`normal mean sd` or `gamma shape scale shift`).
SimScenario read_scenario_overrides(std::istream& in, SimScenario base);

struct LabeledDataset {
    std::vector<ProteinRecord> proteins;
    std::vector<bool> truth_protein;                  // protein present
    std::vector<std::vector<bool>> truth_peptide;     // peptide correctly identified
    std::vector<std::vector<bool>> contaminated;      // incorrect score drawn from f1
};

// Protein k uses random stream derive_seed(seed, k), so output is identical
// for any thread count.
LabeledDataset simulate(const SimScenario& scenario, std::uint64_t seed, int threads = 1);

// Generating parameters expressed as a model (uniform pi1 -> its mean;
// ancillary features off since they are constant in simulated data).
ModelParams scenario_model_params(const SimScenario& scenario);

struct DatasetPaths {
    std::filesystem::path psms, lengths, truth_proteins, truth_peptides;

    static DatasetPaths in_directory(const std::filesystem::path& dir);
};

// PSM table, lengths file and the two truth tables. `header` lines (already
// '#'-prefixed) are written first in every file.
void write_dataset(const LabeledDataset& dataset, const DatasetPaths& paths, std::string_view header = {});

}  // namespace nestmix
