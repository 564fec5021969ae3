#pragma once
// Posterior protein/peptide probabilities from fitted parameters, plus the
// product rule and two-peptide rule baselines.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nestmix/ingestion.hpp"
#include "nestmix/model_params.hpp"

namespace nestmix {

enum class ScoreMethod { nested, product_rule, two_peptide };

std::string_view to_string(ScoreMethod m);

struct ProteinScore {
    std::string protein_id;
    double probability_present = 0.0;
    ScoreMethod method = ScoreMethod::nested;
    std::optional<std::string> group_id;
};

struct PeptideScore {
    std::string peptide;
    std::string protein_id;
    double conditional_prob = 0.0;  // Pr(correct | score, protein present)
    double marginal_prob = 0.0;     // conditional x Pr(protein present)
};

// Pr(protein present | its peptides and peptide count); identical to the
// E-step presence posterior.
double protein_posterior(const ProteinRecord& protein, const ModelParams& params);

// Throws std::invalid_argument when params.pi0 < 1: the marginal factorization
// holds only when absent proteins carry no correct peptides.
PeptideScore peptide_marginal(const ProteinRecord& protein, std::size_t peptide_index, const ModelParams& params);

std::vector<PeptideScore> peptide_marginals(const ProteinRecord& protein, const ModelParams& params);

// 1 - prod(1 - p_i).
double product_rule(std::span<const double> probs);

// True iff at least two probabilities reach the threshold.
bool two_peptide_rule(std::span<const double> probs, double prob_threshold);

// Maximum member probability per group; proteins without a group entry
// form singleton groups keyed by their own id.
std::map<std::string, double> group_probability(std::span<const ProteinScore> scores, const GroupMap& groups);

struct ProteinReportRow {
    std::string protein_id;
    std::string group_id;  // own id when ungrouped
    double prob_nested = 0.0;
    double prob_product = 0.0;
    bool pass_two_peptide = false;
};

struct ScoreTables {
    std::vector<ProteinReportRow> proteins;
    std::vector<PeptideScore> peptides;
};

// Nested posteriors, product rule over the peptide marginals, and the
// two-peptide rule on the same marginals. With a free pi0 < 1 the peptide
// marginal is (1 - T) I0 + T I1. Rows are stably sorted by
// descending nested probability, then protein id.
ScoreTables score_dataset(std::span<const ProteinRecord> data, const ModelParams& params,
                          double two_peptide_threshold = 0.9);

// Highest marginal per peptide sequence across its parent proteins.
std::map<std::string, double> peptide_summary(std::span<const PeptideScore> scores);

void write_protein_table(std::ostream& out, std::span<const ProteinReportRow> rows);
void write_peptide_table(std::ostream& out, std::span<const PeptideScore> rows);

// Generic reader for the score tables: header names -> column values.
struct ScoreTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
};

ScoreTable read_score_table(std::istream& in);

}  // namespace nestmix
