#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dq/codec.hpp"
#include "dq/path.hpp"
#include "dq/sde.hpp"

namespace dq {

struct DistortionReport {
    double rate = 0.0;
    double codebook_log_size = 0.0;
    double p = 2.0;
    Norm norm = Norm::lq(2.0);
    double distortion = 0.0;
    double stderr_ = 0.0;
    double sqrt_r_times_d = 0.0;
    int n_paths = 0;
};

struct CurveFit {
    std::vector<DistortionReport> points;
    double fitted_constant = 0.0;
    double fit_residual = 0.0;
    double free_slope = 0.0;
    double free_constant = 0.0;
};

/// ((1/n) sum e_i^p)^(1/p) plus a delta-method standard error. A single
/// sample yields stderr = NaN.
std::pair<double, double> empirical_distortion(std::span<const double> errors, double p);

/// E[ ||sigma||_{L^rho[0,1]}^p ]^(1/p) by grid quadrature; sigma_t^2 is
/// recovered from the accumulated time change as dphi/dt.
double sigma_norm_moment(const std::vector<PathBundle>& bundles, double p, double rho);

enum class Scheme { wiener_l2, wiener_sup, sup, lp };

std::string scheme_name(Scheme s);

/// Everything a curve run needs. Rates must be increasing.
struct CurveRequest {
    DiffusionSpec spec;
    std::vector<double> x0;
    double dt = 1.0 / 512.0;
    double T = 2.0;
    int n_paths = 2000;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::wiener_l2;
    double p = 2.0;
    double q = 2.0;
    std::vector<double> rates;
    BudgetPolicy policy;
    double phi_smoothness = 1.4;
    int n_blocks = 0;  // 0 = default policy
    int workers = 0;
    int samples_per_coord = 100000;
};

/// Builds codebooks per rate, encodes the ensemble and measures distortion.
std::vector<DistortionReport> rate_distortion_curve(const CurveRequest& request);

/// Least-squares fit of log D = log c - 1/2 log r over the top tail_fraction
/// of rates (slope pinned at -1/2), plus a free-slope diagnostic fit.
CurveFit fit_sqrt_constant(std::span<const DistortionReport> curve, double tail_fraction);

struct HolderMomentReport {
    double alpha = 0.0;
    double kappa = 0.0;
    bool admissible = false;     // kappa > 2/(1-2 alpha)
    double m_moment = 0.0;       // E |M|_alpha^kappa
    double sigma_integral = 0.0; // int_0^1 E|sigma_u|^kappa du
    double ratio = 0.0;          // m_moment / sigma_integral
    double moment_ratio = 0.0;   // (m_moment)^(1/kappa) / (sigma_integral)^(1/kappa)
    double stderr_ = 0.0;        // MC stderr of m_moment
};

/// Ratio of the empirical kappa-th Hoelder-seminorm moment of M against the
/// integrated kappa-th moment of sigma, with the admissibility flag for
/// (alpha, kappa). seminorm_points = 0 uses the full grid.
HolderMomentReport holder_moment_check(const std::vector<PathBundle>& bundles, double alpha,
                                       double kappa, std::size_t seminorm_points = 0,
                                       int workers = 0);

}  // namespace dq
