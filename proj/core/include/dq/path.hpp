#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace dq {

/// A d-dimensional function sampled on the uniform grid {0, dt, 2dt, ..., T}.
/// values is row-major: values[i*d + k] is component k at grid node i.
struct SampledPath {
    std::vector<double> values;
    double dt = 0.0;
    double T = 0.0;
    int d = 1;

    std::size_t len() const { return d > 0 ? values.size() / static_cast<std::size_t>(d) : 0; }
    double t(std::size_t i) const { return static_cast<double>(i) * dt; }

    double at(std::size_t i, int k = 0) const { return values[i * static_cast<std::size_t>(d) + k]; }
    double& at(std::size_t i, int k = 0) { return values[i * static_cast<std::size_t>(d) + k]; }

    std::span<const double> node(std::size_t i) const {
        return {values.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
    }

    /// Linear interpolation of component k at time s; s is clamped to [0, T].
    double interp(double s, int k = 0) const;
};

/// Nondecreasing scalar path representing an intrinsic time change or its
/// reconstruction. The monotone flag records whether monotonicity has been
/// established (by construction or by regularization).
struct TimeChange : SampledPath {
    bool monotone = false;
};

/// Number of grid nodes for a uniform grid on [0, T] with spacing dt.
std::size_t grid_len(double dt, double T);

/// Zero path with the grid implied by (d, dt, T).
SampledPath make_path(int d, double dt, double T);

/// Throws std::invalid_argument unless a and b share (d, len, dt) up to
/// floating-point slack on dt.
void check_grid_compatible(const SampledPath& a, const SampledPath& b);

/// Norm tag carried by codebooks and distortion reports.
struct Norm {
    enum class Kind { sup, lq };
    Kind kind = Kind::sup;
    double q = 2.0;

    static Norm sup() { return {Kind::sup, 0.0}; }
    static Norm lq(double q) { return {Kind::lq, q}; }
    bool is_sup() const { return kind == Kind::sup; }
};

/// Trapezoid quadrature weights for the path's grid (dt/2 at the endpoints).
std::vector<double> trapezoid_weights(std::size_t len, double dt);

// Discrete norms. The L^q norms use trapezoid weights; at each node the
// d components are collapsed with the Euclidean norm.
double sup_norm(const SampledPath& f);
double lq_norm(const SampledPath& f, double q);
double path_norm(const SampledPath& f, const Norm& norm);

double sup_dist(const SampledPath& a, const SampledPath& b);
double lq_dist(const SampledPath& a, const SampledPath& b, double q);
double path_dist(const SampledPath& a, const SampledPath& b, const Norm& norm);

/// L^q distance under explicit nonnegative node weights (a discrete measure
/// on the grid); weights.size() must equal a.len().
double lq_dist_weighted(const SampledPath& a, const SampledPath& b, std::span<const double> weights,
                        double q);

/// Resample f onto the grid (dt, T) by linear interpolation (clamped ends).
SampledPath resample(const SampledPath& f, double dt, double T);

/// First grid_len(dt, T) nodes of f as a path on [0, T]; T must not exceed f.T.
SampledPath slice_to(const SampledPath& f, double T);

}  // namespace dq
