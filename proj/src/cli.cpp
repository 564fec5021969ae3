#include "nestmix/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "nestmix/em.hpp"
#include "nestmix/evaluation.hpp"
#include "nestmix/inference.hpp"
#include "nestmix/simulator.hpp"
#include "nestmix/text_io.hpp"

namespace nestmix {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Error with a preassigned exit code.
struct CommandError : std::runtime_error {
    CommandError(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
    int code;
};

[[noreturn]] void input_error(const std::string& msg) { throw CommandError(kExitInput, msg); }

template <typename F>
int guarded(std::ostream& err, std::string_view name, F&& body) {
    try {
        body();
        return kExitOk;
    } catch (const CommandError& e) {
        err << "nestmix " << name << ": " << e.what() << '\n';
        return e.code;
    } catch (const FitError& e) {
        err << "nestmix " << name << ": fit failed: " << e.what() << '\n';
        return kExitFit;
    } catch (const std::exception& e) {
        err << "nestmix " << name << ": " << e.what() << '\n';
        return kExitInput;
    }
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) input_error(fmt::format("cannot create output directory '{}'", dir.string()));
}

std::uint64_t require_seed(const RunConfig& cfg) {
    if (!cfg.seed) input_error("--seed is required");
    return *cfg.seed;
}

void require_file(const fs::path& p, std::string_view what) {
    if (p.empty()) input_error(fmt::format("missing {} path", what));
    if (!fs::is_regular_file(p)) input_error(fmt::format("{} file '{}' not found", what, p.string()));
}

double parse_prob(const std::string& s, std::string_view where) {
    const auto v = text::to_double(s);
    if (!v) input_error(fmt::format("non-numeric value '{}' in {}", s, where));
    return *v;
}

std::map<std::string, bool> read_truth_proteins(const fs::path& p) {
    require_file(p, "protein truth");
    auto in = text::open_in(p);
    const auto t = read_score_table(in);
    const auto id = t.column("protein_id");
    const auto present = t.column("is_present");
    if (!id || !present) input_error(fmt::format("'{}' needs protein_id and is_present columns", p.string()));
    std::map<std::string, bool> out;
    for (const auto& row : t.rows) out[row[*id]] = row[*present] == "1";
    return out;
}

std::map<std::pair<std::string, std::string>, bool> read_truth_peptides(const fs::path& p) {
    require_file(p, "peptide truth");
    auto in = text::open_in(p);
    const auto t = read_score_table(in);
    const auto pep = t.column("peptide");
    const auto pid = t.column("protein_id");
    const auto ok = t.column("is_correct");
    if (!pep || !pid || !ok) input_error(fmt::format("'{}' needs peptide, protein_id and is_correct columns", p.string()));
    std::map<std::pair<std::string, std::string>, bool> out;
    for (const auto& row : t.rows) out[{row[*pep], row[*pid]}] = row[*ok] == "1";
    return out;
}

void write_method_outputs(const RunConfig& cfg, const std::string& header, const std::string& stem,
                          std::span<const double> probs, std::span<const char> labels) {
    const auto grid = default_threshold_grid(probs);
    {
        auto out = text::open_out(cfg.out / (stem + "_tradeoff.csv"));
        out << header;
        write_tradeoff_csv(out, tradeoff_curve(probs, labels, grid));
    }
    {
        auto out = text::open_out(cfg.out / (stem + "_calibration.csv"));
        out << header;
        write_calibration_csv(out, calibration_table(probs, labels, static_cast<std::size_t>(cfg.n_bins)));
    }
    {
        // A "decoy" here is any entry labeled false: a decoy-database hit in
        // decoy mode, an absent protein or incorrect peptide in truth mode.
        std::vector<char> is_false(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) is_false[i] = labels[i] ? 0 : 1;
        std::vector<FdrPoint> pts;
        pts.reserve(grid.size());
        for (double t : grid) pts.push_back(decoy_fdr(probs, is_false, t));
        auto out = text::open_out(cfg.out / (stem + "_fdr.csv"));
        out << header;
        write_fdr_csv(out, pts);
    }
}

json params_json(const ModelParams& p) {
    std::ostringstream s;
    write_params(s, p);
    json j = json::object();
    std::istringstream in(s.str());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

}  // namespace

std::string output_header(const RunConfig& cfg) {
    std::string flags;
    auto add = [&](std::string_view name, const std::string& value) { flags += fmt::format(" --{} {}", name, value); };
    auto add_path = [&](std::string_view name, const std::optional<fs::path>& p) {
        if (p) add(name, p->string());
    };
    const auto& sc = cfg.subcommand;
    if (sc == "fit") {
        add("psms", cfg.psms.string());
        add("lengths", cfg.lengths.string());
        add_path("groups", cfg.groups);
        add_path("init", cfg.init);
        add("restarts", std::to_string(cfg.restarts));
        add("tol", text::num(cfg.tol));
        add("max-iter", std::to_string(cfg.max_iter));
        add("pi0", std::string(to_string(cfg.pi0_mode)));
        add("density-roles", std::string(to_string(cfg.roles)));
        add("ancillary", cfg.ancillary ? "on" : "off");
        add("decoy-prefix", cfg.decoy_prefix);
        add("two-peptide-threshold", text::num(cfg.two_peptide_threshold));
    } else if (sc == "simulate") {
        if (cfg.preset) add("preset", *cfg.preset);
        add_path("scenario", cfg.scenario);
    } else if (sc == "evaluate") {
        add_path("proteins", cfg.protein_scores);
        add_path("peptides", cfg.peptide_scores);
        add_path("truth-dir", cfg.truth_dir);
        if (cfg.decoy_mode) add("decoy-prefix", cfg.decoy_prefix);
        add("bins", std::to_string(cfg.n_bins));
        if (cfg.by_group) flags += " --by-group";
    } else if (sc == "baseline") {
        add("scores", cfg.scores.string());
        add("rule", cfg.rule);
        add("column", cfg.column);
        add("threshold", text::num(cfg.two_peptide_threshold));
    }
    if (cfg.seed) add("seed", std::to_string(*cfg.seed));
    add("threads", std::to_string(cfg.threads));
    add("out", cfg.out.string());
    return fmt::format("# nestmix {} {}{}\n", kToolVersion, sc, flags);
}

int cmd_fit(const RunConfig& cfg, std::ostream& err) {
    return guarded(err, "fit", [&] {
        const auto seed = require_seed(cfg);
        require_file(cfg.psms, "PSM table");
        require_file(cfg.lengths, "lengths");
        if (cfg.groups) require_file(*cfg.groups, "groups");
        if (cfg.restarts < 1) input_error("--restarts must be >= 1");
        if (!(cfg.tol > 0.0)) input_error("--tol must be positive");

        std::vector<ProteinRecord> data;
        try {
            data = load_dataset(cfg.psms, cfg.lengths, cfg.groups, cfg.decoy_prefix);
        } catch (const std::exception& e) {
            input_error(e.what());
        }
        if (data.empty()) input_error("no proteins in input");

        FitConfig fc;
        fc.n_restarts = cfg.restarts;
        fc.tol = cfg.tol;
        fc.max_iter = cfg.max_iter;
        fc.seed = seed;
        fc.pi0_mode = cfg.pi0_mode;
        fc.roles = cfg.roles;
        fc.use_ancillary = cfg.ancillary;
        fc.threads = cfg.threads;
        if (cfg.init) {
            require_file(*cfg.init, "initial parameters");
            try {
                auto in = text::open_in(*cfg.init);
                fc.init_reference = read_params(in);
            } catch (const std::exception& e) {
                input_error(e.what());
            }
        }

        FitResult res;
        try {
            res = fit(data, fc);
        } catch (const InitError& e) {
            input_error(e.what());
        }
        for (const auto& w : res.warnings) err << "nestmix fit: warning: " << w << '\n';

        ensure_out_dir(cfg.out);
        const auto header = output_header(cfg);
        {
            auto out = text::open_out(cfg.out / "params.txt");
            out << header;
            write_params(out, res.params);
        }
        const auto tables = score_dataset(data, res.params, cfg.two_peptide_threshold);
        {
            auto out = text::open_out(cfg.out / "proteins.tsv");
            out << header;
            write_protein_table(out, tables.proteins);
        }
        {
            auto out = text::open_out(cfg.out / "peptides.tsv");
            out << header;
            write_peptide_table(out, tables.peptides);
        }
        {
            auto out = text::open_out(cfg.out / "fit_report.jsonl");
            out << json{{"header", header.substr(2, header.size() - 3)}}.dump() << '\n';
            for (const auto& r : res.restarts) {
                json j{{"restart", r.index},           {"seed", r.seed},
                       {"ok", r.ok},                   {"log_likelihood", r.ok ? json(r.log_likelihood) : json()},
                       {"iterations", r.iterations},   {"converged", r.converged},
                       {"warnings", r.warnings}};
                if (!r.ok) j["error"] = r.error;
                out << j.dump() << '\n';
            }
            out << json{{"best_restart", res.best_restart},
                        {"log_likelihood", res.log_likelihood},
                        {"iterations", res.n_iterations},
                        {"converged", res.converged},
                        {"params", params_json(res.params)}}
                       .dump()
                << '\n';
        }
        if (!res.converged) err << "nestmix fit: warning: best restart did not converge\n";
    });
}

int cmd_simulate(const RunConfig& cfg, std::ostream& err) {
    return guarded(err, "simulate", [&] {
        const auto seed = require_seed(cfg);
        SimScenario scenario;
        try {
            scenario = scenario_preset(cfg.preset.value_or("S1"));
            if (cfg.scenario) {
                require_file(*cfg.scenario, "scenario");
                auto in = text::open_in(*cfg.scenario);
                scenario = read_scenario_overrides(in, scenario);
            }
        } catch (const CommandError&) {
            throw;
        } catch (const std::exception& e) {
            input_error(e.what());
        }
        ensure_out_dir(cfg.out);
        const auto header = output_header(cfg);
        const auto ds = simulate(scenario, seed, cfg.threads);
        write_dataset(ds, DatasetPaths::in_directory(cfg.out), header);
        auto out = text::open_out(cfg.out / "scenario_params.txt");
        out << header;
        write_params(out, scenario_model_params(scenario));
    });
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& err) {
    return guarded(err, "evaluate", [&] {
        if (!cfg.protein_scores && !cfg.peptide_scores) input_error("give --proteins and/or --peptides");
        if (cfg.decoy_mode == cfg.truth_dir.has_value()) input_error("choose exactly one of --truth-dir or --decoy");
        if (cfg.n_bins < 2) input_error("--bins must be >= 2");
        ensure_out_dir(cfg.out);
        const auto header = output_header(cfg);
        const auto is_decoy_id = [&](const std::string& id) {
            return !cfg.decoy_prefix.empty() && id.starts_with(cfg.decoy_prefix);
        };

        if (cfg.protein_scores) {
            require_file(*cfg.protein_scores, "protein scores");
            auto in = text::open_in(*cfg.protein_scores);
            const auto table = read_score_table(in);
            const auto id_col = table.column("protein_id");
            if (!id_col) input_error("protein scores need a protein_id column");
            const auto group_col = table.column("group_id");

            std::vector<char> labels(table.rows.size());
            if (cfg.truth_dir) {
                const auto truth = read_truth_proteins(*cfg.truth_dir / "truth_proteins.tsv");
                std::vector<std::string> unmatched;
                for (std::size_t r = 0; r < table.rows.size(); ++r) {
                    const auto it = truth.find(table.rows[r][*id_col]);
                    if (it == truth.end()) {
                        unmatched.push_back(table.rows[r][*id_col]);
                    } else {
                        labels[r] = it->second ? 1 : 0;
                    }
                }
                if (!unmatched.empty()) {
                    input_error(fmt::format("proteins missing from truth file: {}", fmt::join(unmatched, ", ")));
                }
            } else {
                for (std::size_t r = 0; r < table.rows.size(); ++r) labels[r] = is_decoy_id(table.rows[r][*id_col]) ? 0 : 1;
            }

            for (std::size_t c = 0; c < table.columns.size(); ++c) {
                if (c == *id_col || (group_col && c == *group_col)) continue;
                const auto& name = table.columns[c];
                std::vector<double> probs(table.rows.size());
                for (std::size_t r = 0; r < table.rows.size(); ++r) probs[r] = parse_prob(table.rows[r][c], name);
                write_method_outputs(cfg, header, "protein_" + name, probs, labels);

                if (cfg.by_group) {
                    if (!group_col) input_error("--by-group needs a group_id column");
                    // Group label: any present member (truth) / any target member (decoy).
                    std::map<std::string, std::pair<double, char>> groups;
                    for (std::size_t r = 0; r < table.rows.size(); ++r) {
                        auto g = table.rows[r][*group_col];
                        if (g.empty() || g == "-") g = table.rows[r][*id_col];
                        auto [it, inserted] = groups.try_emplace(g, probs[r], labels[r]);
                        if (!inserted) {
                            it->second.first = std::max(it->second.first, probs[r]);
                            it->second.second = static_cast<char>(it->second.second | labels[r]);
                        }
                    }
                    std::vector<double> gp;
                    std::vector<char> gl;
                    for (const auto& [g, v] : groups) {
                        gp.push_back(v.first);
                        gl.push_back(v.second);
                    }
                    write_method_outputs(cfg, header, "group_" + name, gp, gl);
                }
            }
        }

        if (cfg.peptide_scores) {
            require_file(*cfg.peptide_scores, "peptide scores");
            auto in = text::open_in(*cfg.peptide_scores);
            const auto table = read_score_table(in);
            const auto pep_col = table.column("peptide");
            const auto pid_col = table.column("protein_id");
            if (!pep_col || !pid_col) input_error("peptide scores need peptide and protein_id columns");

            std::vector<char> labels(table.rows.size());
            if (cfg.truth_dir) {
                const auto truth = read_truth_peptides(*cfg.truth_dir / "truth_peptides.tsv");
                std::vector<std::string> unmatched;
                for (std::size_t r = 0; r < table.rows.size(); ++r) {
                    const auto it = truth.find({table.rows[r][*pep_col], table.rows[r][*pid_col]});
                    if (it == truth.end()) {
                        unmatched.push_back(table.rows[r][*pep_col] + "@" + table.rows[r][*pid_col]);
                    } else {
                        labels[r] = it->second ? 1 : 0;
                    }
                }
                if (!unmatched.empty()) {
                    input_error(fmt::format("peptides missing from truth file: {}", fmt::join(unmatched, ", ")));
                }
            } else {
                for (std::size_t r = 0; r < table.rows.size(); ++r) labels[r] = is_decoy_id(table.rows[r][*pid_col]) ? 0 : 1;
            }
            for (std::size_t c = 0; c < table.columns.size(); ++c) {
                if (c == *pep_col || c == *pid_col) continue;
                const auto& name = table.columns[c];
                std::vector<double> probs(table.rows.size());
                for (std::size_t r = 0; r < table.rows.size(); ++r) probs[r] = parse_prob(table.rows[r][c], name);
                write_method_outputs(cfg, header, "peptide_" + name, probs, labels);
            }
        }
    });
}

int cmd_baseline(const RunConfig& cfg, std::ostream& err) {
    return guarded(err, "baseline", [&] {
        if (cfg.rule != "product" && cfg.rule != "two-peptide") {
            input_error(fmt::format("unknown rule '{}' (expected product|two-peptide)", cfg.rule));
        }
        require_file(cfg.scores, "peptide scores");
        auto in = text::open_in(cfg.scores);
        const auto table = read_score_table(in);
        const auto pid_col = table.column("protein_id");
        if (!pid_col) input_error("peptide scores need a protein_id column");
        const auto prob_col = table.column(cfg.column);
        if (!prob_col) input_error(fmt::format("peptide scores have no '{}' column", cfg.column));

        std::vector<std::string> order;
        std::map<std::string, std::vector<double>> by_protein;
        for (const auto& row : table.rows) {
            auto [it, inserted] = by_protein.try_emplace(row[*pid_col]);
            if (inserted) order.push_back(row[*pid_col]);
            it->second.push_back(parse_prob(row[*prob_col], cfg.column));
        }
        const bool product = cfg.rule == "product";
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& id : order) {
            const auto& probs = by_protein[id];
            rows.emplace_back(id, product ? product_rule(probs) : (two_peptide_rule(probs, cfg.two_peptide_threshold) ? 1.0 : 0.0));
        }
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        ensure_out_dir(cfg.out);
        const std::string column = product ? "prob_product" : "pass_two_peptide";
        auto out = text::open_out(cfg.out / fmt::format("baseline_{}.tsv", product ? "product" : "two_peptide"));
        out << output_header(cfg);
        out << "protein_id\t" << column << '\n';
        for (const auto& [id, v] : rows) {
            out << id << '\t' << (product ? text::num(v) : std::string(v > 0.0 ? "1" : "0")) << '\n';
        }
    });
}

}  // namespace nestmix
