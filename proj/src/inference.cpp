#include "nestmix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "nestmix/em.hpp"
#include "nestmix/text_io.hpp"

namespace nestmix {

std::string_view to_string(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::nested: return "nested";
        case ScoreMethod::product_rule: return "product_rule";
        case ScoreMethod::two_peptide: return "two_peptide";
    }
    return "unknown";
}

double protein_posterior(const ProteinRecord& protein, const ModelParams& params) {
    const std::vector<ProteinRecord> one{protein};
    return e_step(one, params).t_hat[0];
}

std::vector<PeptideScore> peptide_marginals(const ProteinRecord& protein, const ModelParams& params) {
    if (params.pi0 < 1.0) {
        throw std::invalid_argument(
            "peptide marginals need pi0 = 1; with free pi0 use the E-step responsibilities "
            "(marginal = (1 - T) I0 + T I1) instead");
    }
    const std::vector<ProteinRecord> one{protein};
    const auto resp = e_step(one, params);
    const double t = resp.t_hat[0];
    std::vector<PeptideScore> out;
    out.reserve(protein.peptides.size());
    for (std::size_t i = 0; i < protein.peptides.size(); ++i) {
        const double cond = resp.i1(0, i);
        out.push_back({protein.peptides[i].sequence, protein.id, cond, cond * t});
    }
    return out;
}

PeptideScore peptide_marginal(const ProteinRecord& protein, std::size_t peptide_index, const ModelParams& params) {
    if (peptide_index >= protein.peptides.size()) throw std::out_of_range("peptide index out of range");
    return peptide_marginals(protein, params)[peptide_index];
}

double product_rule(std::span<const double> probs) {
    double none = 1.0;
    for (double p : probs) none *= 1.0 - p;
    return 1.0 - none;
}

bool two_peptide_rule(std::span<const double> probs, double prob_threshold) {
    const auto strong = std::count_if(probs.begin(), probs.end(), [&](double p) { return p >= prob_threshold; });
    return strong >= 2;
}

std::map<std::string, double> group_probability(std::span<const ProteinScore> scores, const GroupMap& groups) {
    std::map<std::string, double> out;
    for (const auto& s : scores) {
        std::string key;
        if (const auto g = groups.find(s.protein_id); g != groups.end()) {
            key = g->second;
        } else if (s.group_id) {
            key = *s.group_id;
        } else {
            key = s.protein_id;
        }
        auto [it, inserted] = out.try_emplace(key, s.probability_present);
        if (!inserted) it->second = std::max(it->second, s.probability_present);
    }
    return out;
}

ScoreTables score_dataset(std::span<const ProteinRecord> data, const ModelParams& params,
                          double two_peptide_threshold) {
    const auto resp = e_step(data, params);
    ScoreTables out;
    out.proteins.reserve(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& pro = data[k];
        const double t = resp.t_hat[k];
        std::vector<double> marginals;
        marginals.reserve(pro.peptides.size());
        for (std::size_t i = 0; i < pro.peptides.size(); ++i) {
            const double cond = resp.i1(k, i);
            // Reduces to cond * t when pi0 = 1 (i0 is identically zero).
            const double marginal = params.pi0 < 1.0 ? (1.0 - t) * resp.i0(k, i) + t * cond : cond * t;
            marginals.push_back(marginal);
            out.peptides.push_back({pro.peptides[i].sequence, pro.id, cond, marginal});
        }
        out.proteins.push_back({pro.id, pro.group_id.value_or(pro.id), t, product_rule(marginals),
                                two_peptide_rule(marginals, two_peptide_threshold)});
    }
    std::stable_sort(out.proteins.begin(), out.proteins.end(), [](const auto& a, const auto& b) {
        if (a.prob_nested != b.prob_nested) return a.prob_nested > b.prob_nested;
        return a.protein_id < b.protein_id;
    });
    // Peptides follow their protein's rank.
    std::map<std::string, std::size_t> rank;
    for (std::size_t r = 0; r < out.proteins.size(); ++r) rank[out.proteins[r].protein_id] = r;
    std::stable_sort(out.peptides.begin(), out.peptides.end(),
                     [&](const auto& a, const auto& b) { return rank.at(a.protein_id) < rank.at(b.protein_id); });
    return out;
}

std::map<std::string, double> peptide_summary(std::span<const PeptideScore> scores) {
    std::map<std::string, double> out;
    for (const auto& s : scores) {
        auto [it, inserted] = out.try_emplace(s.peptide, s.marginal_prob);
        if (!inserted) it->second = std::max(it->second, s.marginal_prob);
    }
    return out;
}

void write_protein_table(std::ostream& out, std::span<const ProteinReportRow> rows) {
    out << "protein_id\tgroup_id\tprob_nested\tprob_product\tpass_two_peptide\n";
    for (const auto& r : rows) {
        out << r.protein_id << '\t' << r.group_id << '\t' << text::num(r.prob_nested) << '\t'
            << text::num(r.prob_product) << '\t' << (r.pass_two_peptide ? 1 : 0) << '\n';
    }
}

void write_peptide_table(std::ostream& out, std::span<const PeptideScore> rows) {
    out << "peptide\tprotein_id\tconditional\tmarginal\n";
    for (const auto& r : rows) {
        out << r.peptide << '\t' << r.protein_id << '\t' << text::num(r.conditional_prob) << '\t'
            << text::num(r.marginal_prob) << '\n';
    }
}

std::optional<std::size_t> ScoreTable::column(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
}

ScoreTable read_score_table(std::istream& in) {
    ScoreTable t;
    std::string raw;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = text::strip_cr(raw);
        if (text::is_comment_or_blank(line)) continue;
        const auto cols = text::split(line, '\t');
        if (!header) {
            header = true;
            for (auto c : cols) t.columns.emplace_back(c);
            continue;
        }
        if (cols.size() != t.columns.size()) {
            throw InputError(fmt::format("score table: expected {} columns, found {} at line {}", t.columns.size(),
                                         cols.size(), line_no));
        }
        auto& row = t.rows.emplace_back();
        for (auto c : cols) row.emplace_back(c);
    }
    if (!header) throw InputError("score table has no header line");
    return t;
}

}  // namespace nestmix
