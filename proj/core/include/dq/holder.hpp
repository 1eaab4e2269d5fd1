#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dq/path.hpp"
#include "dq/wiener.hpp"

namespace dq {

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One shell of the layered net: functions with smoothness norm in
/// (radius/e, radius] are covered on a coarse grid with spacing coarse_h and
/// value lattice step value_step, giving sup error <= resolution.
struct NetShell {
    double radius = 0.0;
    double resolution = 0.0;
    double coarse_h = 0.0;
    double value_step = 0.0;
    std::size_t count = 0;
};

/// Construction record for a layered codebook: shell radii s_i = e^i with
/// resolutions eps_i = eps * e^((1+eta) i), stopped at the first shell with
/// eps_i >= xi * s_i.
struct LayeredNetPlan {
    double smoothness = 1.0;  // exponent s of the Hoelder(-Zygmund) ball
    double eta = 0.5;
    double eps = 0.1;
    double xi = 1.0;  // embedding norm estimate (2x max training sup-norm)
    std::vector<NetShell> shells;
};

struct LayeredOptions {
    double eta = 0.5;
    std::size_t hard_cap = std::size_t{1} << 14;
    /// When set, only lattice functions that are nearest-representatives of
    /// some training path are materialized (plus zero). The plan and lattice
    /// geometry are unchanged; this is the ensemble-supported subset of the
    /// same net.
    bool prune_to_training = false;
};

struct LayeredCodebook {
    Codebook cb;
    LayeredNetPlan plan;
};

/// Layered eps-net codebook for time changes. Shell i covers the smoothness-s
/// ball of radius e^i by piecewise-linear interpolants of value-quantized
/// coarse-grid functions (nondecreasing, starting at 0); grid spacing and
/// value step are chosen so that interpolation plus rounding error of any
/// f with ||f||_s <= radius stays below the shell resolution. The union over
/// shells plus the zero function is the codebook.
/// Throws BudgetError when the enumeration would exceed options.hard_cap.
LayeredCodebook build_layered_codebook(const std::vector<TimeChange>& training, double smoothness,
                                       double eps, const LayeredOptions& options = {});

/// Bisects eps so the codebook log-size lands just under the rate budget.
LayeredCodebook layered_codebook_for_rate(const std::vector<TimeChange>& training,
                                          double smoothness, double rate,
                                          const LayeredOptions& options = {});

/// Running maximum t -> sup_{s<=t} f(s); idempotent, 1-Lipschitz in sup norm.
TimeChange monotone_regularize(const SampledPath& f);

struct QuantizedTimeChange {
    TimeChange phi_hat;
    std::size_t index = 0;  // codebook entry selected before regularization
    double dist = 0.0;      // sup distance ||phi - phi_hat|| after regularization
};

/// Nearest entry in sup norm followed by monotone regularization. The
/// codebook must contain zero; if regularization ever breaks the regular-
/// reconstruction inequality ||phi - phi_hat|| <= ||phi||, the zero entry is
/// used instead, so the inequality holds for every sample.
QuantizedTimeChange quantize_time_change(const TimeChange& phi, const Codebook& cb);

/// sup_{t in [0,1]} |W_{phi(t)} - W_{phi_hat(t)}| by linear interpolation of
/// the driver at both time points (d components collapse with the Euclidean
/// norm). Throws std::out_of_range when a time change exceeds the simulated
/// horizon of w.
double cross_term(const SampledPath& w, const TimeChange& phi, const TimeChange& phi_hat);

struct ModulusReport {
    double empirical = 0.0;
    double bound = 0.0;
    double stderr_ = 0.0;
    int n_intervals = 0;
    bool satisfied = false;
};

/// Monte Carlo estimate of P(sup_{|s-t|<=eps1, s,t<=T} |W_t - W_s| <= 3 eps2)
/// against the lower bound (1 - 2 exp(-eps2^2/(2 eps1)))^ceil(T/eps1).
/// Requires eps2 >= sqrt(2 eps1).
ModulusReport modulus_tail_estimate(double T, double eps1, double eps2, int n_mc,
                                    std::uint64_t seed);

}  // namespace dq
