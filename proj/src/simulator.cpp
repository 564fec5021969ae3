#include "nestmix/simulator.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "nestmix/parallel.hpp"
#include "nestmix/random.hpp"
#include "nestmix/text_io.hpp"

namespace nestmix {

namespace {

double draw_score(Rng& rng, const ScoreDensity& d) {
    if (const auto* n = std::get_if<NormalParams>(&d)) return rng.normal(n->mean, n->sd);
    const auto& g = std::get<ShiftedGammaParams>(d);
    return g.shift + rng.gamma(g.shape, g.scale);
}

std::int64_t draw_length(Rng& rng, const LengthSpec& spec, bool present) {
    if (const auto* e = std::get_if<ExponentialLengths>(&spec)) {
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(rng.exponential(e->mean))));
    }
    const auto& u = std::get<UniformLengthsByPresence>(spec);
    return present ? rng.uniform_int(u.present_lo, u.present_hi) : rng.uniform_int(u.absent_lo, u.absent_hi);
}

std::vector<double> parse_numbers(std::string_view s, std::string_view key) {
    std::vector<double> out;
    for (auto part : text::split(s, ' ')) {
        if (part.empty()) continue;
        const auto v = text::to_double(part);
        if (!v) throw std::invalid_argument(fmt::format("scenario: '{}' has non-numeric value '{}'", key, part));
        out.push_back(*v);
    }
    return out;
}

ScoreDensity parse_density(std::string_view value, std::string_view key) {
    const auto sp = value.find(' ');
    const auto family = value.substr(0, sp);
    const auto nums = sp == std::string_view::npos ? std::vector<double>{} : parse_numbers(value.substr(sp + 1), key);
    if (family == "normal" && nums.size() == 2) return NormalParams{nums[0], nums[1]};
    if (family == "gamma" && nums.size() == 3) return ShiftedGammaParams{nums[0], nums[1], nums[2]};
    throw std::invalid_argument(fmt::format("scenario: '{}' expects 'normal mean sd' or 'gamma shape scale shift'", key));
}

}  // namespace

void validate(const SimScenario& s) {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw std::invalid_argument(fmt::format("invalid scenario: {}", what));
    };
    require(s.n_proteins >= 1, "n_proteins must be >= 1");
    require(s.pi0_star >= 0.0 && s.pi0_star <= 1.0, "pi0_star must lie in [0,1]");
    require(s.c0 > 0.0 && s.c1 > 0.0, "rates must be positive");
    require(s.contamination_rate >= 0.0 && s.contamination_rate < 1.0, "contamination_rate must lie in [0,1)");
    if (const auto* f = std::get_if<FixedPi1>(&s.pi1)) {
        require(f->value >= 0.0 && f->value < 1.0, "pi1 must lie in [0,1)");
    } else {
        const auto& u = std::get<UniformPi1>(s.pi1);
        require(u.lo >= 0.0 && u.lo <= u.hi && u.hi < 1.0, "uniform pi1 range must satisfy 0 <= lo <= hi < 1");
    }
    if (const auto* e = std::get_if<ExponentialLengths>(&s.lengths)) {
        require(e->mean > 0.0, "length mean must be positive");
    } else {
        const auto& u = std::get<UniformLengthsByPresence>(s.lengths);
        require(u.present_lo >= 1 && u.present_lo <= u.present_hi, "present length range invalid");
        require(u.absent_lo >= 1 && u.absent_lo <= u.absent_hi, "absent length range invalid");
    }
    ModelParams probe;
    probe.f0 = s.f0;
    probe.f1 = s.f1;
    probe.pi0_star = 0.5;
    probe.pi1 = 0.5;
    validate(probe);
}

SimScenario scenario_preset(std::string_view name) {
    SimScenario s;  // defaults are the S1 design
    if (name == "S1") {
        s.name = "S1";
        return s;
    }
    if (name == "S2") {
        s.name = "S2";
        s.pi0_star = 0.5;
        s.lengths = UniformLengthsByPresence{100, 200, 1000, 2000};
        s.contamination_rate = 0.002;
        return s;
    }
    if (name == "S3") {
        s.name = "S3";
        s.pi1 = UniformPi1{0.0, 0.8};
        return s;
    }
    throw std::invalid_argument(fmt::format("unknown scenario preset '{}' (expected S1, S2 or S3)", name));
}

SimScenario read_scenario_overrides(std::istream& in, SimScenario base) {
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = text::strip_cr(raw);
        if (text::is_comment_or_blank(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(fmt::format("scenario: expected 'key = value' at line {}", line_no));
        }
        auto trim = [](std::string_view v) {
            while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
            while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
            return v;
        };
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        auto one = [&] {
            const auto v = parse_numbers(value, key);
            if (v.size() != 1) throw std::invalid_argument(fmt::format("scenario: '{}' expects one number", key));
            return v[0];
        };
        if (key == "name") {
            base.name = std::string(value);
        } else if (key == "n_proteins") {
            base.n_proteins = static_cast<int>(one());
        } else if (key == "pi0_star") {
            base.pi0_star = one();
        } else if (key == "pi0") {
            base.contamination_rate = 1.0 - one();
        } else if (key == "contamination_rate") {
            base.contamination_rate = one();
        } else if (key == "c0") {
            base.c0 = one();
        } else if (key == "c1") {
            base.c1 = one();
        } else if (key == "pi1") {
            if (value.starts_with("uniform")) {
                const auto v = parse_numbers(value.substr(7), key);
                if (v.size() != 2) throw std::invalid_argument("scenario: 'pi1 = uniform lo hi'");
                base.pi1 = UniformPi1{v[0], v[1]};
            } else {
                base.pi1 = FixedPi1{one()};
            }
        } else if (key == "lengths") {
            if (value.starts_with("exponential")) {
                const auto v = parse_numbers(value.substr(11), key);
                if (v.size() != 1) throw std::invalid_argument("scenario: 'lengths = exponential mean'");
                base.lengths = ExponentialLengths{v[0]};
            } else if (value.starts_with("uniform")) {
                const auto v = parse_numbers(value.substr(7), key);
                if (v.size() != 4) throw std::invalid_argument("scenario: 'lengths = uniform plo phi alo ahi'");
                base.lengths = UniformLengthsByPresence{static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1]),
                                                        static_cast<std::int64_t>(v[2]), static_cast<std::int64_t>(v[3])};
            } else {
                throw std::invalid_argument("scenario: lengths must be 'exponential ...' or 'uniform ...'");
            }
        } else if (key == "f0") {
            base.f0 = parse_density(value, key);
        } else if (key == "f1") {
            base.f1 = parse_density(value, key);
        } else {
            throw std::invalid_argument(fmt::format("scenario: unknown key '{}' at line {}", key, line_no));
        }
    }
    validate(base);
    return base;
}

LabeledDataset simulate(const SimScenario& scenario, std::uint64_t seed, int threads) {
    validate(scenario);
    const auto n = static_cast<std::size_t>(scenario.n_proteins);
    LabeledDataset ds;
    ds.proteins.resize(n);
    ds.truth_protein.resize(n);
    ds.truth_peptide.resize(n);
    ds.contaminated.resize(n);
    std::vector<char> present_flags(n);

    parallel_for(n, threads, [&](std::size_t k) {
        Rng rng = Rng::stream(seed, k);
        const bool present = rng.bernoulli(1.0 - scenario.pi0_star);
        auto& pro = ds.proteins[k];
        pro.id = fmt::format("PROT{:05}", k + 1);
        pro.length = draw_length(rng, scenario.lengths, present);
        const double rate = present ? scenario.c1 : scenario.c0;
        const int count = rng.zero_truncated_poisson(rate * static_cast<double>(pro.length));

        std::vector<bool> correct(static_cast<std::size_t>(count), false);
        std::vector<bool> contaminated(static_cast<std::size_t>(count), false);
        if (present) {
            double pi1 = 0.0;
            if (const auto* f = std::get_if<FixedPi1>(&scenario.pi1)) {
                pi1 = f->value;
            } else {
                const auto& u = std::get<UniformPi1>(scenario.pi1);
                pi1 = rng.uniform(u.lo, u.hi);
            }
            for (;;) {
                bool any = false;
                for (std::size_t i = 0; i < correct.size(); ++i) {
                    correct[i] = rng.bernoulli(1.0 - pi1);
                    any = any || correct[i];
                }
                if (any || !scenario.enforce_correct_peptide) break;
            }
        }

        pro.peptides.resize(static_cast<std::size_t>(count));
        for (std::size_t i = 0; i < pro.peptides.size(); ++i) {
            auto& pep = pro.peptides[i];
            pep.sequence = fmt::format("PEP{:05}_{}", k + 1, i + 1);
            pep.ntt = 2;
            pep.nmc_state = 0;
            if (correct[i]) {
                pep.score = draw_score(rng, scenario.f1);
            } else if (!present && scenario.contamination_rate > 0.0 && rng.bernoulli(scenario.contamination_rate)) {
                contaminated[i] = true;
                pep.score = draw_score(rng, scenario.f1);
            } else {
                pep.score = draw_score(rng, scenario.f0);
            }
        }
        present_flags[k] = present;
        ds.truth_peptide[k] = std::move(correct);
        ds.contaminated[k] = std::move(contaminated);
    });
    for (std::size_t k = 0; k < n; ++k) ds.truth_protein[k] = present_flags[k] != 0;
    return ds;
}

ModelParams scenario_model_params(const SimScenario& s) {
    ModelParams p;
    p.pi0_star = s.pi0_star;
    p.pi0 = s.pi0();
    if (const auto* f = std::get_if<FixedPi1>(&s.pi1)) {
        p.pi1 = f->value;
    } else {
        const auto& u = std::get<UniformPi1>(s.pi1);
        p.pi1 = 0.5 * (u.lo + u.hi);
    }
    p.f0 = s.f0;
    p.f1 = s.f1;
    p.c0.rate_per_length = s.c0;
    p.c1.rate_per_length = s.c1;
    p.use_ancillary = false;
    return p;
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
    return {dir / "psms.tsv", dir / "lengths.tsv", dir / "truth_proteins.tsv", dir / "truth_peptides.tsv"};
}

void write_dataset(const LabeledDataset& ds, const DatasetPaths& paths, std::string_view header) {
    auto psm = text::open_out(paths.psms);
    auto len = text::open_out(paths.lengths);
    auto tpro = text::open_out(paths.truth_proteins);
    auto tpep = text::open_out(paths.truth_peptides);
    for (auto* f : {&psm, &len, &tpro, &tpep}) *f << header;

    psm << "spectrum_id\tpeptide\tproteins\tscore\tntt\tnmc\tis_decoy\n";
    len << "protein_id\tlength\n";
    tpro << "protein_id\tis_present\n";
    tpep << "peptide\tprotein_id\tis_correct\n";
    for (std::size_t k = 0; k < ds.proteins.size(); ++k) {
        const auto& pro = ds.proteins[k];
        len << pro.id << '\t' << pro.length << '\n';
        tpro << pro.id << '\t' << (ds.truth_protein[k] ? 1 : 0) << '\n';
        for (std::size_t i = 0; i < pro.peptides.size(); ++i) {
            const auto& pep = pro.peptides[i];
            psm << "S" << (k + 1) << '_' << (i + 1) << '\t' << pep.sequence << '\t' << pro.id << '\t'
                << text::num(pep.score) << '\t' << pep.ntt << '\t' << pep.nmc_state << '\t' << (pep.is_decoy ? 1 : 0)
                << '\n';
            tpep << pep.sequence << '\t' << pro.id << '\t' << (ds.truth_peptide[k][i] ? 1 : 0) << '\n';
        }
    }
    for (auto* f : {&psm, &len, &tpro, &tpep}) {
        f->flush();
        if (!*f) throw std::runtime_error("failed writing simulated dataset");
    }
}

}  // namespace nestmix
