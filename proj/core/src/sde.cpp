#include "dq/sde.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "dq/parallel.hpp"
#include "dq/rng.hpp"

namespace dq {

void DiffusionSpec::validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("DiffusionSpec: beta must be in (0,1]");
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("DiffusionSpec: L must be finite and positive");
    if (d < 1) throw std::invalid_argument("DiffusionSpec: d must be >= 1");
    if (!b || !sigma) throw std::invalid_argument("DiffusionSpec: b and sigma must be set");
}

PathBundle simulate_path_with_increments(const DiffusionSpec& spec, std::span<const double> x0,
                                         double dt, double T, std::span<const double> dw,
                                         double switch_time) {
    const int d = spec.d;
    const std::size_t n = grid_len(dt, T);
    const std::size_t steps = n - 1;
    if (dw.size() < steps * static_cast<std::size_t>(d))
        throw std::invalid_argument("simulate_path_with_increments: not enough increments");

    PathBundle bundle;
    bundle.x = make_path(d, dt, T);
    bundle.w_driver = make_path(d, dt, T);
    bundle.m = make_path(d, dt, T);
    bundle.a = make_path(d, dt, T);
    static_cast<SampledPath&>(bundle.phi) = make_path(1, dt, T);
    bundle.phi.monotone = true;

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> drift(static_cast<std::size_t>(d), 0.0);
    std::vector<double> a(static_cast<std::size_t>(d), 0.0);
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    double phi = 0.0;

    for (int k = 0; k < d; ++k) {
        bundle.x.at(0, k) = x[k];
        bundle.m.at(0, k) = x[k];
    }

    for (std::size_t j = 0; j < steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        const bool switched = t >= switch_time;
        double sig = 1.0;
        if (switched) {
            std::fill(drift.begin(), drift.end(), 0.0);
        } else {
            spec.b(x, t, drift);
            sig = spec.sigma(x, t);
        }

        for (int k = 0; k < d; ++k) {
            if (!std::isfinite(drift[k]) || !std::isfinite(sig)) {
                std::ostringstream msg;
                msg << "non-finite coefficient at t=" << t << " (step " << j << ")";
                throw SimulationError(msg.str());
            }
        }

        phi += sig * sig * dt;
        for (int k = 0; k < d; ++k) {
            const double dwk = dw[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
            a[k] += drift[k] * dt;
            w[k] += dwk;
            x[k] += drift[k] * dt + sig * dwk;
            if (!std::isfinite(x[k])) {
                std::ostringstream msg;
                msg << "state diverged to non-finite value at t=" << t + dt << " (step " << j << ")";
                throw SimulationError(msg.str());
            }
            bundle.x.at(j + 1, k) = x[k];
            bundle.w_driver.at(j + 1, k) = w[k];
            bundle.a.at(j + 1, k) = a[k];
            bundle.m.at(j + 1, k) = x[k] - a[k];
        }
        bundle.phi.at(j + 1) = phi;
    }
    return bundle;
}

std::vector<PathBundle> simulate_ensemble(const DiffusionSpec& spec, std::span<const double> x0,
                                          double dt, double T, int n_paths, std::uint64_t seed,
                                          const SimOptions& options) {
    spec.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_ensemble: dt must be positive");
    if (dt >= T) throw std::invalid_argument("simulate_ensemble: dt must be smaller than T");
    if (T < 1.0) throw std::invalid_argument("simulate_ensemble: T must be >= 1 so [0,1] fits");
    if (n_paths < 1) throw std::invalid_argument("simulate_ensemble: n_paths must be >= 1");
    if (x0.size() != static_cast<std::size_t>(spec.d))
        throw std::invalid_argument("simulate_ensemble: x0 must have d components");

    const std::size_t steps = grid_len(dt, T) - 1;
    const double sqrt_dt = std::sqrt(dt);
    std::vector<PathBundle> out(static_cast<std::size_t>(n_paths));
    std::exception_ptr first_error;
    std::mutex error_mutex;

    parallel_for(static_cast<std::size_t>(n_paths), options.workers, [&](std::size_t i) {
        try {
            PathRng rng(seed, i);
            std::vector<double> dw(steps * static_cast<std::size_t>(spec.d));
            for (double& v : dw) v = rng.normal() * sqrt_dt;
            out[i] = simulate_path_with_increments(spec, x0, dt, T, dw, options.switch_time);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

AssumptionCReport check_assumption_C(const DiffusionSpec& spec, int n_probe, const ProbeBox& box,
                                     std::uint64_t seed) {
    spec.validate();
    if (n_probe < 2) throw std::invalid_argument("check_assumption_C: n_probe must be >= 2");
    if (box.lo.size() != static_cast<std::size_t>(spec.d) || box.hi.size() != box.lo.size())
        throw std::invalid_argument("check_assumption_C: box bounds must have d components");

    PathRng rng(seed, 0xC0FFEE);
    const int d = spec.d;
    std::vector<double> z(static_cast<std::size_t>(d)), zp(static_cast<std::size_t>(d));
    std::vector<double> bz(static_cast<std::size_t>(d));

    auto sample_point = [&](std::vector<double>& x, double& t) {
        for (int k = 0; k < d; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * rng.uniform();
        t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform();
    };
    auto abs_z = [&](const std::vector<double>& x, double t) {
        double s = t * t;
        for (double v : x) s += v * v;
        return std::sqrt(s);
    };

    AssumptionCReport report;
    double worst_growth_t = 0.0, worst_holder_gap = 0.0;
    for (int i = 0; i < n_probe; ++i) {
        double t = 0.0, tp = 0.0;
        sample_point(z, t);
        sample_point(zp, tp);

        const double sig = spec.sigma(z, t);
        spec.b(z, t, bz);
        double bn = 0.0;
        for (double v : bz) bn += v * v;
        bn = std::sqrt(bn);
        const double growth = (std::abs(sig) + bn) / (spec.L * (abs_z(z, t) + 1.0));
        if (growth > report.max_growth_ratio) {
            report.max_growth_ratio = growth;
            worst_growth_t = t;
        }

        double gap2 = (t - tp) * (t - tp);
        for (int k = 0; k < d; ++k) gap2 += (z[k] - zp[k]) * (z[k] - zp[k]);
        const double gap = std::sqrt(gap2);
        if (gap > 0.0) {
            const double sigp = spec.sigma(zp, tp);
            const double holder =
                std::abs(sig - sigp) / (spec.L * (std::pow(gap, spec.beta) + gap));
            if (holder > report.max_holder_ratio) {
                report.max_holder_ratio = holder;
                worst_holder_gap = gap;
            }
        }
    }
    report.violated = report.max_growth_ratio > 1.0 || report.max_holder_ratio > 1.0;
    std::ostringstream detail;
    detail << "growth " << report.max_growth_ratio << " (t=" << worst_growth_t << "), holder "
           << report.max_holder_ratio << " (|z-z'|=" << worst_holder_gap << ")";
    report.detail = detail.str();
    return report;
}

double time_change_inverse(const TimeChange& phi, double t) {
    const std::size_t n = phi.len();
    if (n == 0) throw std::invalid_argument("time_change_inverse: empty time change");
    if (t < 0.0) throw std::out_of_range("time_change_inverse: t must be >= 0");
    const double total = phi.values[n - 1];
    if (t > total + 1e-12 * std::max(1.0, std::abs(total)))
        throw std::out_of_range("time_change_inverse: t exceeds phi(T)");
    if (t <= phi.values[0]) return 0.0;
    if (t >= total) {
        // first index attaining the total value
        std::size_t i = n - 1;
        while (i > 0 && phi.values[i - 1] >= total) --i;
        return phi.t(i);
    }
    // binary search for the first node with phi >= t
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (phi.values[mid] >= t)
            hi = mid;
        else
            lo = mid;
    }
    const double p0 = phi.values[lo], p1 = phi.values[hi];
    if (p1 > p0) {
        const double frac = (t - p0) / (p1 - p0);
        return phi.t(lo) + frac * phi.dt;
    }
    return phi.t(hi);
}

double holder_seminorm(const SampledPath& f, double alpha, std::size_t max_points) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("holder_seminorm: alpha in (0,1]");
    const std::size_t n = f.len();
    if (n < 2) throw std::invalid_argument("holder_seminorm: need at least 2 grid points");

    std::size_t stride = 1;
    if (max_points > 1 && n > max_points) stride = (n - 1 + max_points - 2) / (max_points - 1);
    const std::size_t m = (n - 1) / stride + 1;
    const double h = f.dt * static_cast<double>(stride);

    // max over pairs lag by lag; the inner scan is branch-light so the
    // O(m^2) cost stays acceptable at desk scale
    std::vector<double> vals;
    vals.reserve(m * static_cast<std::size_t>(f.d));
    for (std::size_t i = 0; i < m; ++i)
        for (int k = 0; k < f.d; ++k) vals.push_back(f.at(i * stride, k));

    const int d = f.d;
    double best = 0.0;
    for (std::size_t lag = 1; lag < m; ++lag) {
        double worst = 0.0;
        if (d == 1) {
            for (std::size_t i = 0; i + lag < m; ++i) {
                const double diff = std::abs(vals[i + lag] - vals[i]);
                if (diff > worst) worst = diff;
            }
        } else {
            for (std::size_t i = 0; i + lag < m; ++i) {
                double s = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double diff = vals[(i + lag) * static_cast<std::size_t>(d) + k] -
                                        vals[i * static_cast<std::size_t>(d) + k];
                    s += diff * diff;
                }
                if (s > worst) worst = s;
            }
            worst = std::sqrt(worst);
        }
        const double ratio = worst / std::pow(static_cast<double>(lag) * h, alpha);
        if (ratio > best) best = ratio;
    }
    return best;
}

double discrete_h_norm(const SampledPath& f) {
    const std::size_t n = f.len();
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < f.d; ++k) {
            const double diff = f.at(i + 1, k) - f.at(i, k);
            s += diff * diff;
        }
        acc += s / f.dt;
    }
    return std::sqrt(acc);
}

SampledPath intrinsic_wiener(const PathBundle& bundle, double ds, double s_max) {
    const double total = bundle.phi.values.empty() ? 0.0 : bundle.phi.values.back();
    if (s_max > total + 1e-12 * std::max(1.0, total))
        throw std::out_of_range(
            "intrinsic_wiener: horizon exceeds phi(T); simulate a longer driver");
    SampledPath w = make_path(bundle.m.d, ds, std::max(s_max, ds));
    for (std::size_t i = 0; i < w.len(); ++i) {
        const double s = std::min(w.t(i), total);
        const double u = time_change_inverse(bundle.phi, s);
        for (int k = 0; k < w.d; ++k) w.at(i, k) = bundle.m.interp(u, k);
    }
    return w;
}

}  // namespace dq
