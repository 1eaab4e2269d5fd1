#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dq/path.hpp"

namespace dq {

/// Nearest-neighbor scalar quantizer: sorted levels with midpoint boundaries.
struct ScalarQuantizer {
    std::vector<double> levels;
    std::vector<double> boundaries;
    double mse = 0.0;

    std::size_t nearest(double x) const;
    double quantize(double x) const { return levels[nearest(x)]; }
};

/// Finite codebook of sampled paths. Entries share one grid. The rate is the
/// natural-log size budget the codebook was built for; len(entries) may
/// exceed exp(rate) by at most the appended zero entry.
struct Codebook {
    std::vector<SampledPath> entries;
    std::vector<double> weights;  // optional; empty means unweighted
    Norm norm = Norm::lq(2.0);
    bool contains_zero = false;
    double rate = 0.0;

    /// Product structure kept by product_codebook for fast L2 assignment:
    /// entry index = sum_j digit_j * stride_j over per-coordinate levels.
    struct ProductStructure {
        int m = 0;  // KL coordinates per state dimension
        std::vector<double> eigenvalues;
        std::vector<std::vector<double>> levels;      // per coordinate, sorted
        std::vector<std::size_t> strides;             // mixed-radix strides
    };
    std::optional<ProductStructure> product;

    std::size_t size() const { return entries.size(); }
    double log_size() const;
};

/// First m Karhunen-Loeve eigenpairs of Brownian motion on [0,1] sampled on
/// the grid with spacing dt: e_j(t) = sqrt(2) sin((j-1/2) pi t),
/// lambda_j = ((j-1/2) pi)^-2. The sampled basis is orthonormal under the
/// trapezoid-weighted inner product.
struct KlBasis {
    int m = 0;
    std::vector<double> eigenvalues;
    std::vector<SampledPath> paths;
};
KlBasis kl_basis(int m, double dt);

/// Lloyd iteration from quantile-spaced initialization until the relative
/// distortion change drops below tol. Empty cells are re-seeded at the
/// sample farthest from its codeword.
ScalarQuantizer lloyd_scalar(std::span<const double> samples, int n_levels, double tol = 1e-10,
                             int max_iter = 200);

/// The seeded standard-normal stream shared by the product-codebook level
/// trainers (N(0, lambda) quantizers are the sqrt(lambda)-scaled copies).
std::vector<double> standard_normal_sample(int n, std::uint64_t seed);

struct ProductCodebookOptions {
    int samples_per_coord = 100000;
    int d = 1;
    double dt = 1.0 / 512.0;
    Norm norm = Norm::lq(2.0);
};

/// KL product codebook for the d-dimensional Wiener process on [0,1]:
/// per-coordinate level counts n_i >= 1 with prod n_i <= exp(rate) are
/// allocated by reverse waterfilling (theta bisection on
/// log n_i = max(0, log(lambda_i/theta)/2)) followed by a greedy refill on
/// exact marginal Lloyd gains; each coordinate quantizer is lloyd_scalar on
/// N(0, lambda_i) samples. Entries are all level combinations through the KL
/// basis plus the zero path.
Codebook product_codebook(double rate, int m, std::span<const double> eigenvalues,
                          std::uint64_t seed, const ProductCodebookOptions& options = {});

/// Default KL truncation for a given rate budget.
int default_kl_m(double rate);

/// Brownian scaling f -> sqrt(T) f(t/T) onto [0, T]; sup distortions scale
/// by exactly sqrt(T). target_dt = 0 keeps the entry grid length.
Codebook rescale_sup(const Codebook& cb, double T, double target_dt = 0.0);

/// Same map viewed in L^q[0, T); induced distortions scale by T^(1/2 + 1/q).
Codebook rescale_lq(const Codebook& cb, double T, double q, double target_dt = 0.0);

struct NearestResult {
    std::size_t index = 0;
    double dist = 0.0;
};

/// Exhaustive scan over entries under the discrete sup or L^q grid norm;
/// ties break to the smallest index. Throws on grid mismatch.
NearestResult nearest(const Codebook& cb, const SampledPath& path, const Norm& norm);

/// Fast L2 assignment through the product structure (falls back to the
/// exhaustive scan when no structure is present). Agrees with nearest() up
/// to floating-point ties.
NearestResult nearest_l2_fast(const Codebook& cb, const SampledPath& path);

/// Coefficient-space assignment for a product codebook: coef holds the
/// trapezoid-weighted KL projections (coordinate-major), residual_sq the
/// squared norm mass outside the coded span. Used by bulk encoders that
/// cache projections across rates.
NearestResult product_assign(const Codebook& cb, std::span<const double> coef, double residual_sq);

/// k-means codebook in R^m.
struct VectorCodebook {
    std::size_t dim = 1;
    std::vector<double> centers;  // k x dim, row-major
    double distortion = 0.0;      // empirical p-th moment achieved on training
    double p = 2.0;

    std::size_t size() const { return dim ? centers.size() / dim : 0; }
    std::size_t nearest(std::span<const double> x) const;
};

/// Lloyd in R^m with floor(exp(rate)) centers, greedy farthest-point seeding
/// and the same empty-cell policy as lloyd_scalar; reports the empirical
/// p-th moment distortion on the training set.
VectorCodebook finite_dim_codebook(std::span<const double> samples, std::size_t dim, double rate,
                                   std::uint64_t seed, double p = 2.0, double tol = 1e-9,
                                   int max_iter = 100);

}  // namespace dq
