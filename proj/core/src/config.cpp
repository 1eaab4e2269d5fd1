#include "dq/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dq/expr.hpp"

namespace dq {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "sde.preset", "sde.d", "sde.x0", "sde.b", "sde.b1", "sde.b2", "sde.b3", "sde.b4",
        "sde.sigma", "sde.L", "sde.beta",
        "sim.dt", "sim.T", "sim.n_paths", "sim.seed",
        "codebooks.samples_per_coord", "codebooks.phi_smoothness", "codebooks.phi_eta",
        "codebooks.hard_cap",
        "curve.scheme", "curve.p", "curve.q", "curve.rates", "curve.gamma1", "curve.gamma2",
        "curve.gamma3", "curve.slack", "curve.n_blocks",
        "output.dir", "output.cache_dir", "output.no_timestamp", "output.workers",
    };
    return keys;
}

double eval_number(const std::string& key, const std::string& value) {
    try {
        return Expression::parse(value, 1).eval(std::vector<double>{0.0}, 0.0);
    } catch (const ExprError& e) {
        throw ConfigError(key + ": not a number (" + e.what() + ")");
    }
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// Rates accept either a comma list of codebook sizes or the range sugar
/// 2^a..2^b (sizes doubling); rates are the natural logs of the sizes.
std::vector<double> parse_rates(const std::string& key, const std::string& value) {
    std::vector<double> rates;
    const auto dots = value.find("..");
    if (dots != std::string::npos) {
        const double lo = eval_number(key, value.substr(0, dots));
        const double hi = eval_number(key, value.substr(dots + 2));
        if (!(lo > 1.0) || !(hi >= lo)) throw ConfigError(key + ": bad size range");
        for (double size = lo; size <= hi * (1.0 + 1e-9); size *= 2.0)
            rates.push_back(std::log(size));
        return rates;
    }
    for (const std::string& tok : split_list(value)) {
        const double size = eval_number(key, tok);
        if (!(size >= 1.0)) throw ConfigError(key + ": codebook sizes must be >= 1");
        rates.push_back(std::log(size));
    }
    return rates;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected a boolean");
}

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (known_keys().count(key) == 0) throw ConfigError("unknown key '" + key + "'");

    if (key == "sde.preset") cfg.preset = value;
    else if (key == "sde.d") cfg.d = static_cast<int>(eval_number(key, value));
    else if (key == "sde.x0") {
        cfg.x0.clear();
        for (const std::string& tok : split_list(value)) cfg.x0.push_back(eval_number(key, tok));
    } else if (key == "sde.b" || key == "sde.b1") {
        if (cfg.b_exprs.empty()) cfg.b_exprs.resize(1);
        cfg.b_exprs[0] = value;
    } else if (key == "sde.b2" || key == "sde.b3" || key == "sde.b4") {
        const std::size_t idx = static_cast<std::size_t>(key.back() - '1');
        if (cfg.b_exprs.size() <= idx) cfg.b_exprs.resize(idx + 1);
        cfg.b_exprs[idx] = value;
    } else if (key == "sde.sigma") cfg.sigma_expr = value;
    else if (key == "sde.L") cfg.L = eval_number(key, value);
    else if (key == "sde.beta") cfg.beta = eval_number(key, value);
    else if (key == "sim.dt") cfg.dt = eval_number(key, value);
    else if (key == "sim.T") cfg.T = eval_number(key, value);
    else if (key == "sim.n_paths") cfg.n_paths = static_cast<int>(eval_number(key, value));
    else if (key == "sim.seed") cfg.seed = static_cast<std::uint64_t>(eval_number(key, value));
    else if (key == "codebooks.samples_per_coord")
        cfg.samples_per_coord = static_cast<int>(eval_number(key, value));
    else if (key == "codebooks.phi_smoothness") cfg.phi_smoothness = eval_number(key, value);
    else if (key == "codebooks.phi_eta") cfg.phi_eta = eval_number(key, value);
    else if (key == "codebooks.hard_cap")
        cfg.hard_cap = static_cast<std::size_t>(eval_number(key, value));
    else if (key == "curve.scheme") cfg.scheme = value;
    else if (key == "curve.p") cfg.p = eval_number(key, value);
    else if (key == "curve.q") cfg.q = eval_number(key, value);
    else if (key == "curve.rates") cfg.rates = parse_rates(key, value);
    else if (key == "curve.gamma1") cfg.gamma1 = eval_number(key, value);
    else if (key == "curve.gamma2") cfg.gamma2 = eval_number(key, value);
    else if (key == "curve.gamma3") cfg.gamma3 = eval_number(key, value);
    else if (key == "curve.slack") cfg.slack = eval_number(key, value);
    else if (key == "curve.n_blocks") cfg.n_blocks = static_cast<int>(eval_number(key, value));
    else if (key == "output.dir") cfg.output_dir = value;
    else if (key == "output.cache_dir") cfg.cache_dir = value;
    else if (key == "output.no_timestamp") cfg.no_timestamp = parse_bool(key, value);
    else if (key == "output.workers") cfg.workers = static_cast<int>(eval_number(key, value));
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

ExperimentConfig ExperimentConfig::load(
    const std::string& file, const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file: " + file);

    ExperimentConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(file + ":" + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(file + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key =
            (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(file + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    for (const auto& [key, value] : overrides) apply(cfg, key, value);
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_overrides(
    const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : overrides) apply(cfg, key, value);
    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(preset == "wiener" || preset == "ou" || preset == "sin-sigma" || preset == "custom",
            "sde.preset must be wiener | ou | sin-sigma | custom");
    require(d >= 1 && d <= 4, "sde.d must be in [1, 4]");
    require(x0.size() == static_cast<std::size_t>(d), "sde.x0 must have d components");
    require(beta > 0.0 && beta <= 1.0, "sde.beta must be in (0, 1]");
    require(L > 0.0 && std::isfinite(L), "sde.L must be finite and positive");
    require(dt > 0.0 && dt <= 0.25, "sim.dt must be in (0, 0.25]");
    require(T >= 1.0 && T <= 64.0, "sim.T must be in [1, 64]");
    require(dt < T, "sim.dt must be smaller than sim.T");
    require(n_paths >= 1 && n_paths <= 2000000, "sim.n_paths must be in [1, 2e6]");
    require(samples_per_coord >= 100, "codebooks.samples_per_coord must be >= 100");
    require(phi_smoothness > 0.0 && phi_smoothness <= 2.0,
            "codebooks.phi_smoothness must be in (0, 2]");
    require(phi_eta > 0.0, "codebooks.phi_eta must be positive");
    require(hard_cap >= 2 && hard_cap <= (std::size_t{1} << 22),
            "codebooks.hard_cap must be in [2, 2^22]");
    require(scheme == "wiener-l2" || scheme == "wiener-sup" || scheme == "sup" || scheme == "lp",
            "curve.scheme must be wiener-l2 | wiener-sup | sup | lp");
    require(p >= 1.0 && p <= 16.0, "curve.p must be in [1, 16]");
    require(q >= 1.0 && q <= 16.0, "curve.q must be in [1, 16]");
    for (std::size_t i = 1; i < rates.size(); ++i)
        require(rates[i] > rates[i - 1], "curve.rates must be increasing");
    require(gamma1 >= 0.0 && gamma1 < 1.0, "curve.gamma1 must be in [0, 1)");
    require(gamma3 > 0.0 && gamma3 < 1.0, "curve.gamma3 must be in (0, 1)");
    require(slack >= 0.0 && slack <= 8.0, "curve.slack must be in [0, 8]");
    require(n_blocks >= 0 && n_blocks <= 64, "curve.n_blocks must be in [0, 64]");
    require(workers >= 0 && workers <= 256, "output.workers must be in [0, 256]");
    if (preset == "custom") {
        require(!sigma_expr.empty(), "custom preset requires sde.sigma");
        require(!b_exprs.empty(), "custom preset requires sde.b (or b1..bd)");
    }
}

DiffusionSpec ExperimentConfig::make_spec() const {
    DiffusionSpec spec;
    spec.d = d;
    spec.L = L;
    spec.beta = beta;

    if (preset == "wiener") {
        spec.b = [](std::span<const double>, double, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        spec.sigma = [](std::span<const double>, double) { return 1.0; };
        return spec;
    }
    if (preset == "ou") {
        spec.b = [](std::span<const double> x, double, std::span<double> out) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
        };
        spec.sigma = [](std::span<const double>, double) { return 1.0; };
        return spec;
    }
    if (preset == "sin-sigma") {
        spec.b = [](std::span<const double> x, double, std::span<double> out) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
        };
        spec.sigma = [](std::span<const double> x, double) { return 1.0 + 0.5 * std::sin(x[0]); };
        return spec;
    }

    // custom coefficients through the expression grammar
    std::vector<Expression> b_parsed;
    for (int k = 0; k < d; ++k) {
        const std::string& src = k < static_cast<int>(b_exprs.size()) && !b_exprs[static_cast<std::size_t>(k)].empty()
                                     ? b_exprs[static_cast<std::size_t>(k)]
                                     : b_exprs.front();
        try {
            b_parsed.push_back(Expression::parse(src, d));
        } catch (const ExprError& e) {
            throw ConfigError(std::string("sde.b: ") + e.what());
        }
    }
    Expression sigma_parsed;
    try {
        sigma_parsed = Expression::parse(sigma_expr, d);
    } catch (const ExprError& e) {
        throw ConfigError(std::string("sde.sigma: ") + e.what());
    }

    spec.b = [exprs = std::move(b_parsed)](std::span<const double> x, double t,
                                           std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = exprs[k].eval(x, t);
    };
    spec.sigma = [expr = std::move(sigma_parsed)](std::span<const double> x, double t) {
        return expr.eval(x, t);
    };
    return spec;
}

CurveRequest ExperimentConfig::make_curve_request() const {
    CurveRequest req;
    req.spec = make_spec();
    req.x0 = x0;
    req.dt = dt;
    req.T = T;
    req.n_paths = n_paths;
    req.seed = seed;
    req.scheme = parse_scheme(scheme);
    req.p = p;
    req.q = q;
    req.rates = rates;
    req.policy.gamma1 = gamma1;
    req.policy.gamma3 = gamma3;
    req.policy.slack = slack;
    req.phi_smoothness = phi_smoothness;
    req.n_blocks = n_blocks;
    req.workers = workers;
    req.samples_per_coord = samples_per_coord;
    return req;
}

std::string ExperimentConfig::resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    if (const char* env = std::getenv("DQ_CACHE_DIR"); env && *env) return env;
    return output_dir + "/cache";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "wiener-l2") return Scheme::wiener_l2;
    if (name == "wiener-sup") return Scheme::wiener_sup;
    if (name == "sup") return Scheme::sup;
    if (name == "lp") return Scheme::lp;
    throw ConfigError("unknown scheme '" + name + "'");
}

}  // namespace dq
