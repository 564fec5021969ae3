#include "nestmix/ingestion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "nestmix/text_io.hpp"

namespace nestmix {

namespace {

constexpr std::array<std::string_view, 7> kPsmColumns = {
    "spectrum_id", "peptide", "proteins", "score", "ntt", "nmc", "is_decoy"};

enum PsmColumn { kSpectrum, kPeptide, kProteins, kScore, kNtt, kNmc, kDecoy };

[[noreturn]] void fail(std::size_t line_no, std::string_view what) {
    throw InputError(fmt::format("{} at line {}", what, line_no));
}

std::vector<std::string> split_proteins(std::string_view field) {
    std::vector<std::string> ids;
    for (auto id : text::split(field, ';')) {
        if (!id.empty()) ids.emplace_back(id);
    }
    return ids;
}

// Two-column `key  value` files (lengths, groups).
template <typename F>
void read_pairs(std::istream& in, std::string_view what, F&& on_row) {
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = text::strip_cr(raw);
        if (text::is_comment_or_blank(line)) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 2) fail(line_no, fmt::format("{} file: expected 2 columns, found {}", what, cols.size()));
        if (!header_seen) {
            header_seen = true;
            // Header is optional; a non-numeric second column marks it.
            if (what == "lengths" && !text::to_int(cols[1])) continue;
            if (what == "groups" && cols[0] == "protein_id") continue;
        }
        on_row(line_no, cols[0], cols[1]);
    }
}

}  // namespace

std::vector<PsmRecord> parse_psm_table(std::istream& in) {
    std::vector<PsmRecord> psms;
    std::array<int, kPsmColumns.size()> index{};
    index.fill(-1);
    std::size_t n_columns = 0;
    bool header_seen = false;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = text::strip_cr(raw);
        if (text::is_comment_or_blank(line)) continue;
        const auto cols = text::split(line, '\t');

        if (!header_seen) {
            header_seen = true;
            n_columns = cols.size();
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const auto it = std::find(kPsmColumns.begin(), kPsmColumns.end(), cols[c]);
                if (it == kPsmColumns.end()) fail(line_no, fmt::format("unknown column '{}'", cols[c]));
                auto& slot = index[static_cast<std::size_t>(it - kPsmColumns.begin())];
                if (slot >= 0) fail(line_no, fmt::format("duplicate column '{}'", cols[c]));
                slot = static_cast<int>(c);
            }
            for (std::size_t k = 0; k < kPsmColumns.size(); ++k) {
                if (index[k] < 0) fail(line_no, fmt::format("missing column '{}'", kPsmColumns[k]));
            }
            continue;
        }

        if (cols.size() != n_columns) {
            fail(line_no, fmt::format("malformed row: expected {} columns, found {}", n_columns, cols.size()));
        }
        auto field = [&](PsmColumn c) { return cols[static_cast<std::size_t>(index[c])]; };
        auto bad = [&](PsmColumn c) {
            fail(line_no, fmt::format("malformed value '{}' in column '{}'", field(c), kPsmColumns[c]));
        };

        PsmRecord r;
        r.spectrum_id = std::string(field(kSpectrum));
        r.peptide = std::string(field(kPeptide));
        if (r.peptide.empty()) bad(kPeptide);
        r.protein_ids = split_proteins(field(kProteins));
        if (r.protein_ids.empty()) fail(line_no, "empty protein list in column 'proteins'");

        const auto score = text::to_double(field(kScore));
        if (!score || !std::isfinite(*score)) bad(kScore);
        r.score = *score;

        const auto ntt = text::to_int(field(kNtt));
        if (!ntt) bad(kNtt);
        if (*ntt < 0 || *ntt > 2) fail(line_no, "ntt out of range");
        r.ntt = static_cast<int>(*ntt);

        const auto nmc = text::to_int(field(kNmc));
        if (!nmc) bad(kNmc);
        if (*nmc < 0) fail(line_no, "nmc out of range");
        r.nmc = static_cast<int>(*nmc);

        const auto decoy = field(kDecoy);
        if (decoy == "0") {
            r.is_decoy = false;
        } else if (decoy == "1") {
            r.is_decoy = true;
        } else {
            bad(kDecoy);
        }
        psms.push_back(std::move(r));
    }
    if (!header_seen) throw InputError("PSM table has no header line");
    return psms;
}

void write_psm_table(std::ostream& out, std::span<const PsmRecord> psms) {
    out << "spectrum_id\tpeptide\tproteins\tscore\tntt\tnmc\tis_decoy\n";
    for (const auto& r : psms) {
        out << r.spectrum_id << '\t' << r.peptide << '\t' << fmt::format("{}", fmt::join(r.protein_ids, ";"))
            << '\t' << text::num(r.score) << '\t' << r.ntt << '\t' << r.nmc << '\t' << (r.is_decoy ? 1 : 0)
            << '\n';
    }
}

LengthMap parse_lengths(std::istream& in) {
    LengthMap lengths;
    read_pairs(in, "lengths", [&](std::size_t line_no, std::string_view id, std::string_view value) {
        const auto len = text::to_int(value);
        if (!len || *len <= 0) fail(line_no, fmt::format("invalid length '{}' for protein '{}'", value, id));
        if (!lengths.emplace(std::string(id), *len).second) {
            fail(line_no, fmt::format("duplicate protein '{}' in lengths file", id));
        }
    });
    return lengths;
}

GroupMap parse_groups(std::istream& in) {
    GroupMap groups;
    read_pairs(in, "groups", [&](std::size_t line_no, std::string_view id, std::string_view group) {
        if (group.empty()) fail(line_no, fmt::format("empty group id for protein '{}'", id));
        if (!groups.emplace(std::string(id), std::string(group)).second) {
            fail(line_no, fmt::format("duplicate protein '{}' in groups file", id));
        }
    });
    return groups;
}

int discretize_nmc(int nmc) noexcept { return std::clamp(nmc, 0, 2); }

std::vector<PeptideObservation> collapse_to_peptides(std::span<const PsmRecord> psms) {
    std::vector<PeptideObservation> out;
    std::unordered_map<std::string_view, std::size_t> slot;
    for (const auto& r : psms) {
        const auto [it, inserted] = slot.try_emplace(r.peptide, out.size());
        // Strict > keeps the first occurrence on ties.
        if (inserted) {
            out.push_back({r.peptide, r.score, r.ntt, discretize_nmc(r.nmc), r.is_decoy});
        } else if (auto& obs = out[it->second]; r.score > obs.score) {
            obs.score = r.score;
            obs.ntt = r.ntt;
            obs.nmc_state = discretize_nmc(r.nmc);
            obs.is_decoy = r.is_decoy;
        }
    }
    return out;
}

PeptideProteinMap peptide_protein_map(std::span<const PsmRecord> psms) {
    PeptideProteinMap map;
    for (const auto& r : psms) {
        auto& ids = map[r.peptide];
        for (const auto& id : r.protein_ids) {
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        }
    }
    return map;
}

std::vector<ProteinRecord> assemble_proteins(std::span<const PeptideObservation> peptides,
                                             const PeptideProteinMap& peptide_to_proteins,
                                             const LengthMap& lengths, const GroupMap* groups,
                                             const std::string& decoy_prefix) {
    std::vector<ProteinRecord> proteins;
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::string> unmapped;
    std::vector<std::string> missing_length;

    for (const auto& pep : peptides) {
        const auto it = peptide_to_proteins.find(pep.sequence);
        if (it == peptide_to_proteins.end() || it->second.empty()) {
            unmapped.push_back(pep.sequence);
            continue;
        }
        for (const auto& pid : it->second) {
            auto [s, inserted] = slot.try_emplace(pid, proteins.size());
            if (inserted) {
                ProteinRecord rec;
                rec.id = pid;
                if (const auto len = lengths.find(pid); len != lengths.end()) {
                    rec.length = len->second;
                } else {
                    missing_length.push_back(pid);
                }
                rec.is_decoy = !decoy_prefix.empty() && pid.starts_with(decoy_prefix);
                if (groups) {
                    if (const auto g = groups->find(pid); g != groups->end()) rec.group_id = g->second;
                }
                proteins.push_back(std::move(rec));
            }
            proteins[s->second].peptides.push_back(pep);
        }
    }
    if (!unmapped.empty()) {
        throw InputError(fmt::format("peptides with no protein mapping: {}", fmt::join(unmapped, ", ")));
    }
    if (!missing_length.empty()) {
        throw InputError(fmt::format("proteins missing from lengths file: {}", fmt::join(missing_length, ", ")));
    }
    return proteins;
}

std::vector<ProteinRecord> load_dataset(const std::filesystem::path& psm_path,
                                        const std::filesystem::path& lengths_path,
                                        const std::optional<std::filesystem::path>& groups_path,
                                        const std::string& decoy_prefix) {
    auto psm_in = text::open_in(psm_path);
    const auto psms = parse_psm_table(psm_in);
    auto len_in = text::open_in(lengths_path);
    const auto lengths = parse_lengths(len_in);
    std::optional<GroupMap> groups;
    if (groups_path) {
        auto g_in = text::open_in(*groups_path);
        groups = parse_groups(g_in);
    }
    const auto peptides = collapse_to_peptides(psms);
    return assemble_proteins(peptides, peptide_protein_map(psms), lengths, groups ? &*groups : nullptr,
                             decoy_prefix);
}

std::size_t total_peptides(std::span<const ProteinRecord> proteins) noexcept {
    std::size_t n = 0;
    for (const auto& p : proteins) n += p.peptides.size();
    return n;
}

}  // namespace nestmix
