#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dq/config.hpp"

namespace dq {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyOptions {
    std::uint64_t seed = 20240817;
    int workers = 0;
    /// Scales ensemble sizes down for smoke runs; 1.0 runs the full suite.
    double scale = 1.0;
};

/// The quantitative acceptance checks, one result per criterion. Ensemble
/// sizes and tolerances are fixed here; options.scale < 1 is for smoke runs
/// only and is reported in the detail string.
std::vector<CheckResult> run_acceptance_checks(const VerifyOptions& options = {});

/// Config-scoped invariant checks (regular reconstruction, rate accounting,
/// curve monotonicity, rerun determinism) on the configured preset.
std::vector<CheckResult> run_property_checks(const ExperimentConfig& config,
                                             const VerifyOptions& options = {});

/// Render results as an aligned pass/fail table.
std::string format_check_table(const std::vector<CheckResult>& results);

}  // namespace dq
