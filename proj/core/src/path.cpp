#include "dq/path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dq {

double SampledPath::interp(double s, int k) const {
    const std::size_t n = len();
    if (n == 0) return 0.0;
    if (s <= 0.0) return at(0, k);
    const double last_t = static_cast<double>(n - 1) * dt;
    if (s >= last_t) return at(n - 1, k);
    const double u = s / dt;
    const std::size_t i = std::min(static_cast<std::size_t>(u), n - 2);
    const double frac = u - static_cast<double>(i);
    return at(i, k) * (1.0 - frac) + at(i + 1, k) * frac;
}

std::size_t grid_len(double dt, double T) {
    if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("grid requires dt > 0 and T > 0");
    if (dt > T) throw std::invalid_argument("grid requires dt <= T");
    return static_cast<std::size_t>(std::floor(T / dt + 1e-9)) + 1;
}

SampledPath make_path(int d, double dt, double T) {
    SampledPath p;
    p.d = d;
    p.dt = dt;
    p.T = T;
    p.values.assign(grid_len(dt, T) * static_cast<std::size_t>(d), 0.0);
    return p;
}

void check_grid_compatible(const SampledPath& a, const SampledPath& b) {
    if (a.d != b.d) throw std::invalid_argument("grid mismatch: different dimension d");
    if (a.len() != b.len()) throw std::invalid_argument("grid mismatch: different grid length");
    const double scale = std::max({std::abs(a.dt), std::abs(b.dt), 1e-300});
    if (std::abs(a.dt - b.dt) > 1e-9 * scale)
        throw std::invalid_argument("grid mismatch: different dt");
}

std::vector<double> trapezoid_weights(std::size_t len, double dt) {
    std::vector<double> w(len, dt);
    if (len == 0) return w;
    w.front() = dt / 2.0;
    w.back() = dt / 2.0;
    if (len == 1) w.front() = dt;
    return w;
}

namespace {

double node_norm(const SampledPath& f, std::size_t i) {
    if (f.d == 1) return std::abs(f.values[i]);
    double s = 0.0;
    for (int k = 0; k < f.d; ++k) {
        const double v = f.at(i, k);
        s += v * v;
    }
    return std::sqrt(s);
}

double node_dist(const SampledPath& a, const SampledPath& b, std::size_t i) {
    if (a.d == 1) return std::abs(a.values[i] - b.values[i]);
    double s = 0.0;
    for (int k = 0; k < a.d; ++k) {
        const double v = a.at(i, k) - b.at(i, k);
        s += v * v;
    }
    return std::sqrt(s);
}

}  // namespace

double sup_norm(const SampledPath& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.len(); ++i) m = std::max(m, node_norm(f, i));
    return m;
}

double lq_norm(const SampledPath& f, double q) {
    if (!(q >= 1.0)) throw std::invalid_argument("lq_norm requires q >= 1");
    const std::size_t n = f.len();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = (i == 0 || i + 1 == n) ? f.dt / 2.0 : f.dt;
        if (n == 1) w = f.dt;
        acc += w * std::pow(node_norm(f, i), q);
    }
    return std::pow(acc, 1.0 / q);
}

double path_norm(const SampledPath& f, const Norm& norm) {
    return norm.is_sup() ? sup_norm(f) : lq_norm(f, norm.q);
}

double sup_dist(const SampledPath& a, const SampledPath& b) {
    check_grid_compatible(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.len(); ++i) m = std::max(m, node_dist(a, b, i));
    return m;
}

double lq_dist(const SampledPath& a, const SampledPath& b, double q) {
    check_grid_compatible(a, b);
    if (!(q >= 1.0)) throw std::invalid_argument("lq_dist requires q >= 1");
    const std::size_t n = a.len();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = (i == 0 || i + 1 == n) ? a.dt / 2.0 : a.dt;
        if (n == 1) w = a.dt;
        acc += w * std::pow(node_dist(a, b, i), q);
    }
    return std::pow(acc, 1.0 / q);
}

double path_dist(const SampledPath& a, const SampledPath& b, const Norm& norm) {
    return norm.is_sup() ? sup_dist(a, b) : lq_dist(a, b, norm.q);
}

double lq_dist_weighted(const SampledPath& a, const SampledPath& b, std::span<const double> weights,
                        double q) {
    check_grid_compatible(a, b);
    if (weights.size() != a.len())
        throw std::invalid_argument("lq_dist_weighted: weights must match the grid");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.len(); ++i) acc += weights[i] * std::pow(node_dist(a, b, i), q);
    return std::pow(acc, 1.0 / q);
}

SampledPath resample(const SampledPath& f, double dt, double T) {
    SampledPath out = make_path(f.d, dt, T);
    const std::size_t n = out.len();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = out.t(i);
        for (int k = 0; k < f.d; ++k) out.at(i, k) = f.interp(s, k);
    }
    return out;
}

SampledPath slice_to(const SampledPath& f, double T) {
    const std::size_t n = grid_len(f.dt, T);
    if (n > f.len()) throw std::invalid_argument("slice_to: T exceeds the path horizon");
    SampledPath out;
    out.d = f.d;
    out.dt = f.dt;
    out.T = T;
    out.values.assign(f.values.begin(),
                      f.values.begin() + static_cast<std::ptrdiff_t>(n * static_cast<std::size_t>(f.d)));
    return out;
}

}  // namespace dq
