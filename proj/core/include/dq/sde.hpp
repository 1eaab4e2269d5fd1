#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dq/path.hpp"

namespace dq {

/// Scalar diffusion coefficient sigma(x, t).
using ScalarCoefficient = std::function<double(std::span<const double>, double)>;
/// Drift b(x, t) written into out (size d).
using DriftCoefficient = std::function<void(std::span<const double>, double, std::span<double>)>;

/// Drift/diffusion pair with the declared growth/regularity constants
/// (L, beta): |sigma(z)|+|b(z)| <= L(|z|+1) and
/// |sigma(z)-sigma(z')| <= L(|z-z'|^beta + |z-z'|).
struct DiffusionSpec {
    DriftCoefficient b;
    ScalarCoefficient sigma;
    double L = 1.0;
    double beta = 1.0;
    int d = 1;

    void validate() const;
};

/// One simulated path with its Doob-Meyer pieces: x = m + a pointwise by
/// construction, phi(t) accumulates sigma(X_s, s)^2 ds by left-endpoint sums.
struct PathBundle {
    SampledPath x;
    SampledPath w_driver;
    SampledPath m;
    SampledPath a;
    TimeChange phi;
};

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimOptions {
    /// Past this time the coefficients are switched to sigma = 1, b = 0 so
    /// that phi keeps increasing without affecting the coding window.
    double switch_time = 1.0;
    int workers = 0;  // 0 = hardware concurrency
};

/// Euler-Maruyama ensemble; path i is a pure function of (spec, x0, seed, i).
std::vector<PathBundle> simulate_ensemble(const DiffusionSpec& spec, std::span<const double> x0,
                                          double dt, double T, int n_paths, std::uint64_t seed,
                                          const SimOptions& options = {});

/// Single path driven by explicit Wiener increments dw (row-major, one
/// d-vector per step, already scaled by sqrt(dt)). Used by refinement
/// studies that need the same driver at several resolutions.
PathBundle simulate_path_with_increments(const DiffusionSpec& spec, std::span<const double> x0,
                                         double dt, double T, std::span<const double> dw,
                                         double switch_time = 1.0);

/// Probe box for the assumption checker: per-component state bounds plus a
/// time interval.
struct ProbeBox {
    std::vector<double> lo, hi;
    double t_lo = 0.0, t_hi = 1.0;
};

struct AssumptionCReport {
    double max_growth_ratio = 0.0;
    double max_holder_ratio = 0.0;
    bool violated = false;
    std::string detail;
};

/// Samples n_probe random pairs in the box and reports the worst ratios of
/// the two Assumption (C) inequalities; any ratio > 1 flags a violation.
AssumptionCReport check_assumption_C(const DiffusionSpec& spec, int n_probe, const ProbeBox& box,
                                     std::uint64_t seed);

/// Generalized inverse inf{s >= 0 : phi(s) >= t}, right-continuous in t,
/// with linear interpolation inside a strictly increasing grid cell.
/// Throws std::out_of_range for t > phi(T).
double time_change_inverse(const TimeChange& phi, double t);

/// Exact discrete alpha-Hoelder seminorm max_{i<j} |f(t_j)-f(t_i)| / (t_j-t_i)^alpha.
/// O(n^2); max_points > 0 subsamples the grid to at most that many nodes
/// first (the documented coarse option for ensemble sweeps). d > 1 collapses
/// components with the Euclidean norm.
double holder_seminorm(const SampledPath& f, double alpha, std::size_t max_points = 0);

/// Discrete Cameron-Martin seminorm: sqrt(sum_i |f(t_{i+1})-f(t_i)|^2 / dt).
double discrete_h_norm(const SampledPath& f);

/// The Wiener process W with M = W_phi, recovered from a bundle as
/// m(phi^{-1}(s)) and sampled on the grid (ds, [0, s_max]).
/// Requires s_max <= phi(T).
SampledPath intrinsic_wiener(const PathBundle& bundle, double ds, double s_max);

}  // namespace dq
