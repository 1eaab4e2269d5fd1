#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dq/lab.hpp"
#include "dq/sde.hpp"

namespace dq {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key = value configuration with [section] prefixes. Numeric values
/// are evaluated as constant expressions, so dt = 2^-9 and rates = 2^4..2^12
/// both work. Unknown keys are rejected.
struct ExperimentConfig {
    // [sde]
    std::string preset = "wiener";  // wiener | ou | sin-sigma | custom
    int d = 1;
    std::vector<double> x0{0.0};
    std::vector<std::string> b_exprs;  // custom drift, one expression per component
    std::string sigma_expr;            // custom scalar diffusion
    double L = 3.0;
    double beta = 1.0;

    // [sim]
    double dt = 1.0 / 512.0;
    double T = 2.0;
    int n_paths = 2000;
    std::uint64_t seed = 1;

    // [codebooks]
    int samples_per_coord = 100000;
    double phi_smoothness = 1.4;
    double phi_eta = 0.5;
    std::size_t hard_cap = std::size_t{1} << 14;

    // [encode] / [curve]
    std::string scheme = "wiener-l2";  // wiener-l2 | wiener-sup | sup | lp
    double p = 2.0;
    double q = 2.0;
    std::vector<double> rates;  // nats
    double gamma1 = 0.0;        // 0 = derived from beta
    double gamma2 = 0.0;        // recorded, unused by the implemented scheme
    double gamma3 = 2.0 / 3.0;
    double slack = 2.0;
    int n_blocks = 0;  // 0 = ceil(r^(1/3))

    // [output]
    std::string output_dir = "out";
    std::string cache_dir;  // default: $DQ_CACHE_DIR or output_dir/cache
    bool no_timestamp = false;
    int workers = 0;

    /// Parse file + command-line overrides (section-qualified keys).
    static ExperimentConfig load(const std::string& file,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});
    static ExperimentConfig from_overrides(
        const std::vector<std::pair<std::string, std::string>>& overrides);

    void validate() const;  // throws ConfigError with the offending key
    DiffusionSpec make_spec() const;
    CurveRequest make_curve_request() const;
    std::string resolved_cache_dir() const;
};

Scheme parse_scheme(const std::string& name);

}  // namespace dq
