#include "nestmix/model_params.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "nestmix/text_io.hpp"

namespace nestmix {

namespace {

void require(bool ok, std::string_view what) {
    if (!ok) throw std::invalid_argument(fmt::format("invalid model parameters: {}", what));
}

void validate_density(const ScoreDensity& d, std::string_view name) {
    if (const auto* n = std::get_if<NormalParams>(&d)) {
        require(std::isfinite(n->mean), fmt::format("{} mean not finite", name));
        require(n->sd > 0.0 && std::isfinite(n->sd), fmt::format("{} sd must be > 0", name));
    } else {
        const auto& g = std::get<ShiftedGammaParams>(d);
        require(g.shape > 0.0 && std::isfinite(g.shape), fmt::format("{} shape must be > 0", name));
        require(g.scale > 0.0 && std::isfinite(g.scale), fmt::format("{} scale must be > 0", name));
        require(std::isfinite(g.shift), fmt::format("{} shift not finite", name));
    }
}

void validate_multinomial(const MultinomialParams& m, std::string_view name) {
    double sum = 0.0;
    for (double p : m.probs) {
        require(p >= 0.0, fmt::format("{} has a negative probability", name));
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-12, fmt::format("{} probabilities sum to {}", name, sum));
}

void write_density(std::ostream& out, std::string_view key, const ScoreDensity& d) {
    if (const auto* n = std::get_if<NormalParams>(&d)) {
        out << key << ".family = normal\n";
        out << key << ".mean = " << text::num(n->mean) << '\n';
        out << key << ".sd = " << text::num(n->sd) << '\n';
    } else {
        const auto& g = std::get<ShiftedGammaParams>(d);
        out << key << ".family = gamma\n";
        out << key << ".shape = " << text::num(g.shape) << '\n';
        out << key << ".scale = " << text::num(g.scale) << '\n';
        out << key << ".shift = " << text::num(g.shift) << '\n';
    }
}

void write_multinomial(std::ostream& out, std::string_view key, const MultinomialParams& m) {
    out << key << " = " << text::num(m.probs[0]) << ' ' << text::num(m.probs[1]) << ' ' << text::num(m.probs[2])
        << '\n';
}

class KeyValues {
public:
    explicit KeyValues(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    const std::string& raw(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw std::invalid_argument(fmt::format("params file: missing key '{}'", key));
        return it->second;
    }

    double number(const std::string& key) const {
        const auto v = text::to_double(raw(key));
        if (!v) throw std::invalid_argument(fmt::format("params file: '{}' is not a number", key));
        return *v;
    }

    ScoreDensity density(const std::string& key) const {
        const auto& family = raw(key + ".family");
        if (family == "normal") return NormalParams{number(key + ".mean"), number(key + ".sd")};
        if (family == "gamma") {
            return ShiftedGammaParams{number(key + ".shape"), number(key + ".scale"), number(key + ".shift")};
        }
        throw std::invalid_argument(fmt::format("params file: unknown family '{}' for {}", family, key));
    }

    MultinomialParams multinomial(const std::string& key) const {
        const auto parts = text::split(raw(key), ' ');
        if (parts.size() != 3) throw std::invalid_argument(fmt::format("params file: '{}' needs 3 values", key));
        MultinomialParams m;
        for (std::size_t s = 0; s < 3; ++s) {
            const auto v = text::to_double(parts[s]);
            if (!v) throw std::invalid_argument(fmt::format("params file: '{}' is not numeric", key));
            m.probs[s] = *v;
        }
        return m;
    }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace

void validate(const ModelParams& p, bool require_rate_order) {
    require(p.pi0_star > 0.0 && p.pi0_star < 1.0, "pi0_star must lie in (0,1)");
    require(p.pi0 > 0.0 && p.pi0 <= 1.0, "pi0 must lie in (0,1]");
    require(p.pi1 > 0.0 && p.pi1 < 1.0, "pi1 must lie in (0,1)");
    validate_density(p.f0, "f0");
    validate_density(p.f1, "f1");
    validate_multinomial(p.ntt0, "ntt0");
    validate_multinomial(p.ntt1, "ntt1");
    validate_multinomial(p.nmc0, "nmc0");
    validate_multinomial(p.nmc1, "nmc1");
    require(p.c0.rate_per_length > 0.0 && std::isfinite(p.c0.rate_per_length), "c0 must be > 0");
    require(p.c1.rate_per_length > 0.0 && std::isfinite(p.c1.rate_per_length), "c1 must be > 0");
    if (require_rate_order) require(p.c1.rate_per_length > p.c0.rate_per_length, "c1 must exceed c0");
}

void write_params(std::ostream& out, const ModelParams& p) {
    out << "format_version = " << kParamsFormatVersion << '\n';
    out << "pi0_star = " << text::num(p.pi0_star) << '\n';
    out << "pi0 = " << text::num(p.pi0) << '\n';
    out << "pi1 = " << text::num(p.pi1) << '\n';
    write_density(out, "f0", p.f0);
    write_density(out, "f1", p.f1);
    write_multinomial(out, "ntt0", p.ntt0);
    write_multinomial(out, "ntt1", p.ntt1);
    write_multinomial(out, "nmc0", p.nmc0);
    write_multinomial(out, "nmc1", p.nmc1);
    out << "c0 = " << text::num(p.c0.rate_per_length) << '\n';
    out << "c1 = " << text::num(p.c1.rate_per_length) << '\n';
    out << "use_ancillary = " << (p.use_ancillary ? 1 : 0) << '\n';
}

ModelParams read_params(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = text::strip_cr(raw);
        if (text::is_comment_or_blank(line)) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(fmt::format("params file: expected 'key = value' at line {}", line_no));
        }
        kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 3));
    }
    const KeyValues v(std::move(kv));
    if (v.raw("format_version") != std::to_string(kParamsFormatVersion)) {
        throw std::invalid_argument(fmt::format("params file: unsupported format_version '{}'", v.raw("format_version")));
    }
    ModelParams p;
    p.pi0_star = v.number("pi0_star");
    p.pi0 = v.number("pi0");
    p.pi1 = v.number("pi1");
    p.f0 = v.density("f0");
    p.f1 = v.density("f1");
    p.ntt0 = v.multinomial("ntt0");
    p.ntt1 = v.multinomial("ntt1");
    p.nmc0 = v.multinomial("nmc0");
    p.nmc1 = v.multinomial("nmc1");
    p.c0.rate_per_length = v.number("c0");
    p.c1.rate_per_length = v.number("c1");
    const auto& anc = v.raw("use_ancillary");
    if (anc != "0" && anc != "1") throw std::invalid_argument("params file: use_ancillary must be 0 or 1");
    p.use_ancillary = anc == "1";
    validate(p);
    return p;
}

std::string_view to_string(Pi0Mode m) { return m == Pi0Mode::fixed ? "fixed" : "free"; }
std::string_view to_string(DensityRoles r) { return r == DensityRoles::real ? "real" : "sim"; }

Pi0Mode parse_pi0_mode(std::string_view s) {
    if (s == "fixed") return Pi0Mode::fixed;
    if (s == "free") return Pi0Mode::free;
    throw std::invalid_argument(fmt::format("unknown pi0 mode '{}' (expected fixed|free)", s));
}

DensityRoles parse_density_roles(std::string_view s) {
    if (s == "real") return DensityRoles::real;
    if (s == "sim") return DensityRoles::sim;
    throw std::invalid_argument(fmt::format("unknown density roles '{}' (expected real|sim)", s));
}

}  // namespace nestmix
