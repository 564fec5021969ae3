#pragma once
// Search-engine output -> protein/peptide hierarchy.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nestmix {

// Raised for malformed or inconsistent input files.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PsmRecord {
    std::string spectrum_id;
    std::string peptide;
    std::vector<std::string> protein_ids;
    double score = 0.0;
    int ntt = 0;
    int nmc = 0;
    bool is_decoy = false;

    bool operator==(const PsmRecord&) const = default;
};

// One unique putative peptide, summarized by its best-scoring PSM.
struct PeptideObservation {
    std::string sequence;
    double score = 0.0;
    int ntt = 0;
    int nmc_state = 0;  // 0, 1, or 2 (= two or more missed cleavages)
    bool is_decoy = false;

    bool operator==(const PeptideObservation&) const = default;
};

struct ProteinRecord {
    std::string id;
    std::int64_t length = 0;
    std::vector<PeptideObservation> peptides;
    bool is_decoy = false;
    std::optional<std::string> group_id;

    std::size_t n_peptides() const noexcept { return peptides.size(); }

    bool operator==(const ProteinRecord&) const = default;
};

using PeptideProteinMap = std::map<std::string, std::vector<std::string>>;
using LengthMap = std::map<std::string, std::int64_t>;
using GroupMap = std::map<std::string, std::string>;

inline constexpr const char* kDefaultDecoyPrefix = "decoy_";

std::vector<PsmRecord> parse_psm_table(std::istream& in);
void write_psm_table(std::ostream& out, std::span<const PsmRecord> psms);

LengthMap parse_lengths(std::istream& in);
GroupMap parse_groups(std::istream& in);

int discretize_nmc(int nmc) noexcept;

std::vector<PeptideObservation> collapse_to_peptides(std::span<const PsmRecord> psms);

// Union of protein ids per peptide sequence, in order of first appearance.
PeptideProteinMap peptide_protein_map(std::span<const PsmRecord> psms);

std::vector<ProteinRecord> assemble_proteins(std::span<const PeptideObservation> peptides,
                                             const PeptideProteinMap& peptide_to_proteins,
                                             const LengthMap& lengths,
                                             const GroupMap* groups = nullptr,
                                             const std::string& decoy_prefix = kDefaultDecoyPrefix);

// Reads the PSM table, lengths and optional groups file and assembles proteins.
std::vector<ProteinRecord> load_dataset(const std::filesystem::path& psm_path,
                                        const std::filesystem::path& lengths_path,
                                        const std::optional<std::filesystem::path>& groups_path,
                                        const std::string& decoy_prefix = kDefaultDecoyPrefix);

std::size_t total_peptides(std::span<const ProteinRecord> proteins) noexcept;

}  // namespace nestmix
