#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "nestmix/em.hpp"
#include "nestmix/inference.hpp"
#include "oracles.hpp"

using namespace nestmix;

TEST_CASE("protein posterior") {
    ModelParams p;
    p.pi0_star = 0.5;
    p.f0 = p.f1 = NormalParams{0.0, 1.0};
    p.c0 = p.c1 = {0.01};
    p.use_ancillary = false;
    ProteinRecord pro{"A", 100, {{"a", 0.3, 2, 0, false}}, false, std::nullopt};
    CHECK(protein_posterior(pro, p) == doctest::Approx(0.5).epsilon(1e-14));
    p.pi0_star = 1.0;
    CHECK(protein_posterior(pro, p) == 0.0);
}

TEST_CASE("protein posterior agrees exactly with the E-step and the enumeration") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto inst = oracle::random_instance(500 + s, 5, 3, false);
        const auto resp = e_step(inst.proteins, inst.params);
        for (std::size_t k = 0; k < inst.proteins.size(); ++k) {
            CHECK(protein_posterior(inst.proteins[k], inst.params) == resp.t_hat[k]);
            CHECK(std::abs(protein_posterior(inst.proteins[k], inst.params) -
                           oracle::enumerate_protein(inst.proteins[k], inst.params).t_hat) < 1e-10);
        }
    }
}

TEST_CASE("peptide marginals") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto inst = oracle::random_instance(900 + s, 5, 3, false);
        for (const auto& pro : inst.proteins) {
            const double t = protein_posterior(pro, inst.params);
            const auto ms = peptide_marginals(pro, inst.params);
            double sum = 0.0;
            for (const auto& m : ms) {
                CHECK(m.marginal_prob <= m.conditional_prob);
                CHECK(m.marginal_prob >= 0.0);
                CHECK(m.conditional_prob <= 1.0);
                CHECK(m.marginal_prob == m.conditional_prob * t);
                sum += m.marginal_prob;
            }
            CHECK(sum <= static_cast<double>(pro.n_peptides()) * t + 1e-15);
        }
    }

    ModelParams p;
    p.f0 = NormalParams{0.0, 1.0};
    p.f1 = NormalParams{3.0, 1.0};
    p.use_ancillary = false;
    ProteinRecord pro{"A", 100, {{"a", 0.3, 2, 0, false}, {"b", 2.0, 2, 0, false}}, false, std::nullopt};
    p.pi0_star = 1e-300;
    for (const auto& m : peptide_marginals(pro, p)) CHECK(m.marginal_prob == doctest::Approx(m.conditional_prob));
    p.pi0_star = 1.0;
    for (const auto& m : peptide_marginals(pro, p)) CHECK(m.marginal_prob == 0.0);
    CHECK(peptide_marginal(pro, 1, p).peptide == "b");
    CHECK_THROWS_AS(peptide_marginal(pro, 2, p), std::out_of_range);
    p.pi0 = 0.9;
    CHECK_THROWS_AS(peptide_marginals(pro, p), std::invalid_argument);
}

TEST_CASE("product rule") {
    CHECK(product_rule(std::vector<double>{0.7}) == doctest::Approx(0.7));
    CHECK(product_rule(std::vector<double>{0.5, 0.5}) == doctest::Approx(0.75));
    CHECK(product_rule(std::vector<double>{0.2, 1.0, 0.1}) == 1.0);
    Rng rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> ps(static_cast<std::size_t>(rng.uniform_int(1, 6)));
        for (auto& v : ps) v = rng.uniform();
        const double base = product_rule(ps);
        CHECK(base >= *std::max_element(ps.begin(), ps.end()) - 1e-15);
        auto raised = ps;
        raised[0] = std::min(1.0, raised[0] + rng.uniform(0.0, 0.3));
        CHECK(product_rule(raised) >= base);
    }
}

TEST_CASE("two-peptide rule") {
    CHECK(two_peptide_rule(std::vector<double>{0.99, 0.98}, 0.9));
    CHECK_FALSE(two_peptide_rule(std::vector<double>{0.99}, 0.9));
    CHECK_FALSE(two_peptide_rule(std::vector<double>{0.91, 0.89}, 0.9));
}

TEST_CASE("group probability") {
    const std::vector<ProteinScore> scores{{"P1", 0.2, ScoreMethod::nested, std::nullopt},
                                           {"P2", 0.9, ScoreMethod::nested, std::nullopt},
                                           {"P3", 0.4, ScoreMethod::nested, std::nullopt}};
    const GroupMap groups{{"P1", "G"}, {"P2", "G"}};
    const auto g = group_probability(scores, groups);
    CHECK(g.at("G") == 0.9);
    CHECK(g.at("P3") == 0.4);
    auto reversed = scores;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(group_probability(reversed, groups) == g);
    const auto own = group_probability(scores, {});
    CHECK(own.size() == 3);
    CHECK(own.at("P1") == 0.2);
}

TEST_CASE("score tables are sorted and round-trip through the reader") {
    const auto inst = oracle::random_instance(4242, 5, 3, false);
    const auto tables = score_dataset(inst.proteins, inst.params);
    REQUIRE(tables.proteins.size() == inst.proteins.size());
    for (std::size_t r = 1; r < tables.proteins.size(); ++r) {
        const auto& a = tables.proteins[r - 1];
        const auto& b = tables.proteins[r];
        CHECK((a.prob_nested > b.prob_nested || (a.prob_nested == b.prob_nested && a.protein_id < b.protein_id)));
    }
    for (const auto& row : tables.proteins) {
        const auto it = std::find_if(inst.proteins.begin(), inst.proteins.end(),
                                     [&](const auto& p) { return p.id == row.protein_id; });
        const auto ms = peptide_marginals(*it, inst.params);
        std::vector<double> probs;
        for (const auto& m : ms) probs.push_back(m.marginal_prob);
        CHECK(row.prob_nested == protein_posterior(*it, inst.params));
        CHECK(row.prob_product == product_rule(probs));
        CHECK(row.pass_two_peptide == two_peptide_rule(probs, 0.9));
    }

    std::stringstream ps, pp;
    write_protein_table(ps, tables.proteins);
    write_peptide_table(pp, tables.peptides);
    const auto pt = read_score_table(ps);
    CHECK(pt.columns == std::vector<std::string>{"protein_id", "group_id", "prob_nested", "prob_product",
                                                 "pass_two_peptide"});
    REQUIRE(pt.rows.size() == tables.proteins.size());
    CHECK(std::stod(pt.rows[0][2]) == tables.proteins[0].prob_nested);
    const auto et = read_score_table(pp);
    CHECK(et.columns == std::vector<std::string>{"peptide", "protein_id", "conditional", "marginal"});
    CHECK(et.rows.size() == tables.peptides.size());
    CHECK(et.column("marginal") == 3u);
    CHECK_FALSE(et.column("nope").has_value());
}

TEST_CASE("free pi0 marginals mix both presence states") {
    const auto inst = oracle::random_instance(77, 5, 3, true);
    REQUIRE(inst.params.pi0 < 1.0);
    const auto tables = score_dataset(inst.proteins, inst.params);
    const auto resp = e_step(inst.proteins, inst.params);
    for (const auto& row : tables.peptides) {
        CHECK(row.marginal_prob >= 0.0);
        CHECK(row.marginal_prob <= 1.0);
    }
    // First peptide of the first protein, checked by hand.
    const auto& pro = inst.proteins[0];
    const double t = resp.t_hat[0];
    const double expected = (1.0 - t) * resp.i0(0, 0) + t * resp.i1(0, 0);
    const auto it = std::find_if(tables.peptides.begin(), tables.peptides.end(), [&](const auto& r) {
        return r.protein_id == pro.id && r.peptide == pro.peptides[0].sequence;
    });
    REQUIRE(it != tables.peptides.end());
    CHECK(it->marginal_prob == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("peptide summary takes the best parent") {
    const std::vector<PeptideScore> s{{"A", "P1", 0.9, 0.3}, {"A", "P2", 0.8, 0.6}, {"B", "P1", 0.5, 0.1}};
    const auto m = peptide_summary(s);
    CHECK(m.at("A") == 0.6);
    CHECK(m.at("B") == 0.1);
}
