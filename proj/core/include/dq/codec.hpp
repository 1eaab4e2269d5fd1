#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dq/holder.hpp"
#include "dq/path.hpp"
#include "dq/sde.hpp"
#include "dq/wiener.hpp"

namespace dq {

/// Exponents of the sublinear side budgets r_phi = r^gamma1, r_drift =
/// r^gamma3. Defaults follow the construction in the source analysis;
/// they are tunable because nothing pins them as optimal.
struct BudgetPolicy {
    double gamma1 = 0.0;  // 0 = derive from beta: (1 + beta/8) / (1 + beta/4)
    double gamma3 = 2.0 / 3.0;
    double slack = 2.0;

    double resolve_gamma1(double beta) const {
        return gamma1 > 0.0 ? gamma1 : (1.0 + beta / 8.0) / (1.0 + beta / 4.0);
    }
};

/// Rate budget for one encoding. The Wiener stage receives the nominal rate
/// r; the time-change and drift stages receive sublinear side budgets, so
/// rate_used tops out at r * (1 + slack).
struct EncodingBudget {
    double r = 0.0;
    double r_phi = 0.0;
    double r_drift = 0.0;
    double r_wiener = 0.0;
    double delta_r = 0.0;
    int n_blocks = 1;
    double slack = 2.0;

    static EncodingBudget for_sup(double r, double beta, const BudgetPolicy& policy = {});
    static EncodingBudget for_lp(double r, double beta, int d, const BudgetPolicy& policy = {});

    void validate() const;  // throws std::invalid_argument
};

/// Default block count for the L^p scheme.
int default_n_blocks(double rate);

/// Shared, immutable codebooks consumed by the encoders.
struct CodebookSet {
    Codebook phi_cb;                       // sup norm, contains zero
    Codebook drift_cb;                     // sup norm, contains zero
    std::vector<Codebook> wiener_ladder;   // unit-interval codebooks, increasing rate
    std::optional<VectorCodebook> anchor_cb;  // block anchors (L^p scheme)
    std::optional<VectorCodebook> offset_cb;  // rotation endpoint offsets (L^p scheme)
    std::vector<SampledPath> probe_paths;     // fixed Wiener probes for rotation selection

    /// Largest ladder codebook with log-size <= rate (smallest one if none fit).
    const Codebook& ladder_at(double rate) const;
};

struct StageErrors {
    double drift = 0.0;
    double cross = 0.0;
    double wiener = 0.0;
};

struct Reconstruction {
    SampledPath x_hat;
    TimeChange phi_hat;
    std::vector<std::size_t> indices;  // phi, drift, wiener / per-block codewords
    double rate_used = 0.0;
    double total_error = 0.0;  // scheme norm of x - x_hat on [0,1]
    StageErrors stages;
    std::vector<double> block_rates;   // L^p scheme ledger
    std::vector<double> block_errors;  // p-th power error mass per block
};

/// Two-stage sup-norm encoder: quantize phi, pick the drift codeword in sup
/// norm, then code the time-changed Wiener path on [0, tau] with the unit
/// codebook rescaled to tau = phi_hat(1) (conditional coding: the rescaled
/// codebook depends on the quantized tau only).
Reconstruction encode_sup(const PathBundle& bundle, const EncodingBudget& budget,
                          const CodebookSet& cbs);

struct DriftQuantizerOptions {
    std::size_t hard_cap = std::size_t{1} << 14;
    bool prune_to_training = true;
    double tol = 1e-9;
};

/// Codebook for bounded-variation drift paths: layered nets of Cameron-Martin
/// balls realized by coarse-grid derivative quantization. Only a unit-horizon
/// net is stored; Brownian scaling maps it to other horizons. Paths with
/// infinite discrete H-norm are rejected.
Codebook drift_quantizer(const std::vector<SampledPath>& a_paths, double rate, double T,
                         const DriftQuantizerOptions& options = {});

/// Rate allocation over block time increments: r_i = max(share_i * r, sqrt(r))
/// with share_i proportional to delta_tau_i^(p/(p+2)).
std::vector<double> allocate_rates(std::span<const double> delta_tau, double r, double p);

struct AdaptOptions {
    int rotation_candidates = 32;
    std::uint64_t seed = 0x5eedULL;
};

/// Measure-adapted codebook in L^q(nu) on [0, T): picks the rotation offset
/// t* minimizing the averaged distortion of the base codebook over the probe
/// paths, then augments every rotated codeword with quantized endpoint
/// offsets (one per arc) from a finite-dimensional codebook of rate delta_r
/// built on offset_samples (flattened 2d-vectors). Codebook size is at most
/// |cb| * exp(delta_r) rounded up by one.
Codebook adapt_codebook_to_measure(const Codebook& cb, std::span<const double> nu, double delta_r,
                                   std::span<const double> offset_samples,
                                   const std::vector<SampledPath>& probe_paths,
                                   const AdaptOptions& options = {});

struct CodebookSetOptions {
    double phi_smoothness = 1.4;
    double phi_eta = 0.5;
    std::size_t hard_cap = std::size_t{1} << 14;
    int samples_per_coord = 100000;
    Norm wiener_norm = Norm::lq(2.0);
    double ladder_step = 1.0;  // nats between unit-codebook rungs
    double p = 2.0;
    bool lp_extras = false;
    bool prune_phi = true;
    bool prune_drift = true;
    std::uint64_t seed = 1;
};

/// Builds the full codebook set from a training ensemble: trained layered
/// nets for phi and drift, the unit-interval Wiener ladder, and (for the L^p
/// scheme) the anchor and offset quantizers plus fixed rotation probes.
CodebookSet build_codebook_set(const std::vector<PathBundle>& training,
                               const EncodingBudget& budget, const CodebookSetOptions& options);

/// Block scheme for the L^p norm: split W on [0, tau] at tau_i = phi_hat(i/n)
/// into within-block increments (coded per block with allocate_rates and the
/// measure-adapted ladder codebooks under nu = lambda(phi_hat^{-1})) and the
/// piecewise-constant anchor process (coded by the anchor codebook at rate
/// sqrt(r)).
Reconstruction encode_lp(const PathBundle& bundle, const EncodingBudget& budget, double p,
                         const CodebookSet& cbs);

/// Generalized entropy sum_x w_x (log 1/w_x)^p with the 0 log 0 = 0
/// convention. Diagnostic for side-information cost.
double generalized_entropy(std::span<const double> weights, double p);

}  // namespace dq
