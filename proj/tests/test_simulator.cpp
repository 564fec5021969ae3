#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "nestmix/ingestion.hpp"
#include "nestmix/simulator.hpp"

using namespace nestmix;

namespace {

// Mean of a zero-truncated Poisson(lambda).
double ztp_mean(double lambda) { return lambda / -std::expm1(-lambda); }
double ztp_var(double lambda) {
    const double m = ztp_mean(lambda);
    return m * (1.0 + lambda - m);
}

}  // namespace

TEST_CASE("presets") {
    const auto s1 = scenario_preset("S1");
    CHECK(s1.n_proteins == 2000);
    CHECK(s1.pi0_star == 0.88);
    CHECK(s1.c0 == 0.018);
    CHECK(s1.c1 == 0.033);
    CHECK(std::get<FixedPi1>(s1.pi1).value == 0.58);
    CHECK(std::get<ShiftedGammaParams>(s1.f0) == ShiftedGammaParams{86.46, 0.093, -8.18});
    CHECK(std::get<NormalParams>(s1.f1) == NormalParams{3.63, 2.07});

    const auto s2 = scenario_preset("S2");
    CHECK(s2.pi0_star == 0.5);
    CHECK(s2.pi0() == doctest::Approx(0.998));
    CHECK(std::holds_alternative<UniformLengthsByPresence>(s2.lengths));

    const auto s3 = scenario_preset("S3");
    CHECK(std::get<UniformPi1>(s3.pi1).lo == 0.0);
    CHECK(std::get<UniformPi1>(s3.pi1).hi == 0.8);

    CHECK_THROWS_AS(scenario_preset("S9"), std::invalid_argument);
}

TEST_CASE("simulation is deterministic for any thread count") {
    auto sc = scenario_preset("S2");
    sc.n_proteins = 500;
    const auto a = simulate(sc, 42);
    const auto b = simulate(sc, 42, 4);
    CHECK(a.proteins == b.proteins);
    CHECK(a.truth_peptide == b.truth_peptide);
    CHECK(a.contaminated == b.contaminated);
    CHECK_FALSE(simulate(sc, 43).proteins == a.proteins);
}

TEST_CASE("S1 structure") {
    const auto sc = scenario_preset("S1");
    const auto ds = simulate(sc, 1);
    REQUIRE(ds.proteins.size() == 2000);
    std::size_t present = 0;
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        const auto& pro = ds.proteins[k];
        CHECK(pro.n_peptides() >= 1);
        CHECK(pro.length >= 1);
        bool any_correct = false;
        for (std::size_t i = 0; i < pro.n_peptides(); ++i) {
            any_correct = any_correct || ds.truth_peptide[k][i];
            CHECK(pro.peptides[i].ntt == 2);
            CHECK(pro.peptides[i].nmc_state == 0);
            CHECK_FALSE(ds.contaminated[k][i]);
        }
        if (ds.truth_protein[k]) {
            ++present;
            CHECK(any_correct);
        } else {
            CHECK_FALSE(any_correct);
        }
    }
    const double n = 2000.0, p = 0.12;
    CHECK(std::abs(static_cast<double>(present) - n * p) <= 3.0 * std::sqrt(n * p * (1.0 - p)));
}

TEST_CASE("absent-protein counts follow the truncated Poisson") {
    auto sc = scenario_preset("S1");
    sc.n_proteins = 6000;
    const auto ds = simulate(sc, 9);
    double sum_n = 0.0, sum_mean = 0.0, sum_var = 0.0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        if (ds.truth_protein[k]) continue;
        const double lambda = sc.c0 * static_cast<double>(ds.proteins[k].length);
        sum_n += static_cast<double>(ds.proteins[k].n_peptides());
        sum_mean += ztp_mean(lambda);
        sum_var += ztp_var(lambda);
        ++m;
    }
    CHECK(m > 0);
    CHECK(std::abs(sum_n - sum_mean) <= 3.0 * std::sqrt(sum_var));
}

TEST_CASE("correct fraction on present proteins without enforcement") {
    auto sc = scenario_preset("S1");
    sc.n_proteins = 4000;
    sc.pi0_star = 0.3;
    sc.enforce_correct_peptide = false;
    const auto ds = simulate(sc, 10);
    double correct = 0.0, total = 0.0;
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        if (!ds.truth_protein[k]) continue;
        for (bool c : ds.truth_peptide[k]) correct += c ? 1.0 : 0.0, total += 1.0;
    }
    const double q = 1.0 - 0.58;
    CHECK(std::abs(correct / total - q) <= 3.0 * std::sqrt(q * (1.0 - q) / total));
}

TEST_CASE("S2 lengths and contamination") {
    const auto sc = scenario_preset("S2");
    const auto ds = simulate(sc, 3);
    std::size_t contaminated = 0, absent_peptides = 0;
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        const auto len = ds.proteins[k].length;
        if (ds.truth_protein[k]) {
            CHECK((len >= 100 && len <= 200));
        } else {
            CHECK((len >= 1000 && len <= 2000));
            for (std::size_t i = 0; i < ds.contaminated[k].size(); ++i) {
                CHECK_FALSE(ds.truth_peptide[k][i]);
                contaminated += ds.contaminated[k][i] ? 1 : 0;
                ++absent_peptides;
            }
        }
    }
    const double n = static_cast<double>(absent_peptides), r = 0.002;
    CHECK(std::abs(static_cast<double>(contaminated) - n * r) <= 3.0 * std::sqrt(n * r * (1.0 - r)) + 1.0);
}

TEST_CASE("S3 gives heterogeneous incorrect proportions") {
    const auto ds = simulate(scenario_preset("S3"), 6);
    double correct = 0.0, total = 0.0;
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        if (!ds.truth_protein[k]) continue;
        for (bool c : ds.truth_peptide[k]) correct += c ? 1.0 : 0.0, total += 1.0;
    }
    // Mean pi1 is 0.4, so roughly 60% correct (enforcement nudges it up).
    CHECK(correct / total > 0.5);
    CHECK(correct / total < 0.75);
}

TEST_CASE("scenario overrides") {
    std::istringstream in(
        "# custom run\n"
        "name = tiny\n"
        "n_proteins = 50\n"
        "pi0_star = 0.7\n"
        "pi1 = uniform 0.1 0.5\n"
        "lengths = uniform 10 20 30 40\n"
        "f0 = normal -1 1\n"
        "f1 = gamma 5 1 -4\n"
        "pi0 = 0.99\n");
    const auto sc = read_scenario_overrides(in, scenario_preset("S1"));
    CHECK(sc.name == "tiny");
    CHECK(sc.n_proteins == 50);
    CHECK(sc.pi0_star == 0.7);
    CHECK(std::get<UniformPi1>(sc.pi1).hi == 0.5);
    CHECK(std::get<UniformLengthsByPresence>(sc.lengths).absent_hi == 40);
    CHECK(std::get<NormalParams>(sc.f0) == NormalParams{-1.0, 1.0});
    CHECK(std::get<ShiftedGammaParams>(sc.f1) == ShiftedGammaParams{5.0, 1.0, -4.0});
    CHECK(sc.contamination_rate == doctest::Approx(0.01));
    CHECK(sc.c0 == 0.018);

    std::istringstream bad_key("colour = blue\n");
    CHECK_THROWS(read_scenario_overrides(bad_key, scenario_preset("S1")));
    std::istringstream bad_value("pi0_star = 1.5\n");
    CHECK_THROWS(read_scenario_overrides(bad_value, scenario_preset("S1")));

    auto s = scenario_preset("S1");
    s.c0 = -1.0;
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
    s = scenario_preset("S1");
    s.contamination_rate = 1.0;
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
}

TEST_CASE("written datasets re-ingest to identical proteins") {
    auto sc = scenario_preset("S2");
    sc.n_proteins = 300;
    const auto ds = simulate(sc, 12);
    const auto dir = std::filesystem::temp_directory_path() / "nestmix_sim_roundtrip";
    std::filesystem::create_directories(dir);
    const auto paths = DatasetPaths::in_directory(dir);
    write_dataset(ds, paths, "# test header\n");
    const auto back = load_dataset(paths.psms, paths.lengths, std::nullopt);
    CHECK(back == ds.proteins);
    std::filesystem::remove_all(dir);
}

TEST_CASE("scenario model parameters") {
    const auto p = scenario_model_params(scenario_preset("S3"));
    CHECK(p.pi1 == doctest::Approx(0.4));
    CHECK_FALSE(p.use_ancillary);
    CHECK(scenario_model_params(scenario_preset("S2")).pi0 == doctest::Approx(0.998));
}
