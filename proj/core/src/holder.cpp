#include "dq/holder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

#include "dq/rng.hpp"
#include "dq/sde.hpp"

namespace dq {

namespace {

constexpr double kCountCap = 1e18;

/// Lattice geometry of one shell. Functions are piecewise linear over K
/// coarse cells with node values on the value_step lattice; nondecreasing
/// and starting at 0 (the time-change specialization of the net).
struct ShellLattice {
    double radius = 1.0;
    double resolution = 0.1;
    double h = 0.5;           // coarse cell width
    double value_step = 0.05;
    std::size_t cells = 2;
    long long value_cap = 1;   // max node value in lattice units
    long long max_inc = 1;     // s <= 1: max per-cell value increment (units)
    long long slope_cap = 1;   // s > 1: max slope (units of step/h)
    long long max_dslope = 1;  // s > 1: max slope change between cells (units)
    bool second_order = false; // true when smoothness > 1
};

ShellLattice shell_lattice(double smoothness, double radius, double resolution, double grid_dt) {
    ShellLattice sh;
    sh.radius = radius;
    sh.resolution = resolution;
    const double a = std::min(smoothness, 1.0);
    double h = std::pow(resolution / (2.0 * radius), 1.0 / smoothness);
    h = std::clamp(h, grid_dt, 1.0);
    sh.cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1.0 / h)));
    sh.h = 1.0 / static_cast<double>(sh.cells);
    sh.value_step = resolution / 2.0;
    sh.value_cap = static_cast<long long>(std::ceil(radius / sh.value_step));
    sh.second_order = smoothness > 1.0;
    if (sh.second_order) {
        const double alpha = smoothness - 1.0;
        sh.slope_cap = static_cast<long long>(
            std::ceil(3.0 * radius * sh.h / sh.value_step));
        sh.max_dslope = static_cast<long long>(std::ceil(
                            radius * std::pow(2.0 * sh.h, alpha) * sh.h / sh.value_step)) +
                        2;
    } else {
        sh.max_inc = static_cast<long long>(
                         std::ceil(radius * std::pow(sh.h, a) / sh.value_step)) +
                     1;
    }
    return sh;
}

double count_shell(const ShellLattice& sh) {
    const std::size_t K = sh.cells;
    if (!sh.second_order) {
        // DP over value units
        const std::size_t V = static_cast<std::size_t>(sh.value_cap);
        std::vector<double> cur(V + 1, 0.0), next(V + 1, 0.0);
        cur[0] = 1.0;
        for (std::size_t step = 0; step < K; ++step) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t v = 0; v <= V; ++v) {
                if (cur[v] == 0.0) continue;
                for (long long inc = 0; inc <= sh.max_inc; ++inc) {
                    const std::size_t nv = v + static_cast<std::size_t>(inc);
                    if (nv > V) break;
                    next[nv] = std::min(kCountCap, next[nv] + cur[v]);
                }
            }
            cur.swap(next);
        }
        double total = 0.0;
        for (double c : cur) total = std::min(kCountCap, total + c);
        return total;
    }
    // DP over (value units, slope units)
    const std::size_t V = static_cast<std::size_t>(sh.value_cap);
    const std::size_t G = static_cast<std::size_t>(sh.slope_cap);
    if ((V + 1) * (G + 1) > 4'000'000) return kCountCap;
    std::vector<double> cur((V + 1) * (G + 1), 0.0), next((V + 1) * (G + 1), 0.0);
    // initial slope free in [0, G]
    for (std::size_t g = 0; g <= G; ++g) {
        if (g <= V) cur[g * (V + 1) + g] = 1.0;  // first cell consumes slope g
    }
    for (std::size_t step = 1; step < K; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t g = 0; g <= G; ++g)
            for (std::size_t v = 0; v <= V; ++v) {
                const double c = cur[g * (V + 1) + v];
                if (c == 0.0) continue;
                const long long lo = std::max<long long>(0, static_cast<long long>(g) - sh.max_dslope);
                const long long hi =
                    std::min<long long>(static_cast<long long>(G), static_cast<long long>(g) + sh.max_dslope);
                for (long long ng = lo; ng <= hi; ++ng) {
                    const std::size_t nv = v + static_cast<std::size_t>(ng);
                    if (nv > V) break;
                    double& slot = next[static_cast<std::size_t>(ng) * (V + 1) + nv];
                    slot = std::min(kCountCap, slot + c);
                }
            }
        cur.swap(next);
    }
    double total = 0.0;
    for (double c : cur) total = std::min(kCountCap, total + c);
    return total;
}

void enumerate_shell(const ShellLattice& sh, std::size_t cap,
                     std::vector<std::vector<long long>>& out) {
    const std::size_t K = sh.cells;
    std::vector<long long> units(K + 1, 0);

    if (!sh.second_order) {
        // DFS over value increments
        auto rec = [&](auto&& self, std::size_t step) -> void {
            if (out.size() > cap) return;
            if (step == K) {
                out.push_back(units);
                return;
            }
            for (long long inc = 0; inc <= sh.max_inc; ++inc) {
                const long long nv = units[step] + inc;
                if (nv > sh.value_cap) break;
                units[step + 1] = nv;
                self(self, step + 1);
                if (out.size() > cap) return;
            }
        };
        rec(rec, 0);
        return;
    }

    auto rec = [&](auto&& self, std::size_t step, long long slope) -> void {
        if (out.size() > cap) return;
        if (step == K) {
            out.push_back(units);
            return;
        }
        const long long lo = step == 0 ? 0 : std::max<long long>(0, slope - sh.max_dslope);
        const long long hi = step == 0 ? sh.slope_cap : std::min(sh.slope_cap, slope + sh.max_dslope);
        for (long long g = lo; g <= hi; ++g) {
            const long long nv = units[step] + g;
            if (nv > sh.value_cap) break;
            units[step + 1] = nv;
            self(self, step + 1, g);
            if (out.size() > cap) return;
        }
    };
    rec(rec, 0, 0);
}

SampledPath materialize(const std::vector<long long>& units, const ShellLattice& sh, double dt,
                        double T) {
    SampledPath out = make_path(1, dt, T);
    const std::size_t n = out.len();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::min(out.t(i), 1.0);
        const double pos = t / sh.h;
        const std::size_t cell = std::min(static_cast<std::size_t>(pos), sh.cells - 1);
        const double frac = pos - static_cast<double>(cell);
        const double v0 = static_cast<double>(units[cell]) * sh.value_step;
        const double v1 = static_cast<double>(units[cell + 1]) * sh.value_step;
        out.values[i] = v0 + (v1 - v0) * std::min(frac, 1.0);
    }
    return out;
}

/// Smoothness-norm estimate on a fixed coarse estimation grid: sup norm plus
/// the Hoelder seminorm of the function (s <= 1) or of its slope sequence
/// (s > 1).
double norm_estimate(const TimeChange& phi, double smoothness) {
    const std::size_t est_cells = 64;
    const std::size_t n = phi.len();
    const std::size_t stride = std::max<std::size_t>(1, (n - 1) / est_cells);
    const std::size_t m = (n - 1) / stride;
    const double h = phi.dt * static_cast<double>(stride);
    double sup = 0.0;
    std::vector<double> nodes(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
        nodes[j] = phi.values[j * stride];
        sup = std::max(sup, std::abs(nodes[j]));
    }
    double semi = 0.0;
    if (smoothness <= 1.0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j <= m; ++j)
                semi = std::max(semi, std::abs(nodes[j] - nodes[i]) /
                                          std::pow(static_cast<double>(j - i) * h, smoothness));
    } else {
        const double alpha = smoothness - 1.0;
        std::vector<double> slopes(m);
        for (std::size_t j = 0; j < m; ++j) slopes[j] = (nodes[j + 1] - nodes[j]) / h;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j)
                semi = std::max(semi, std::abs(slopes[j] - slopes[i]) /
                                          std::pow(static_cast<double>(j - i) * h, alpha));
    }
    return sup + semi;
}

}  // namespace

LayeredCodebook build_layered_codebook(const std::vector<TimeChange>& training, double smoothness,
                                       double eps, const LayeredOptions& options) {
    if (training.empty()) throw std::invalid_argument("build_layered_codebook: empty training set");
    if (!(smoothness > 0.0)) throw std::invalid_argument("build_layered_codebook: smoothness must be > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("build_layered_codebook: eps must be > 0");
    if (!(options.eta > 0.0)) throw std::invalid_argument("build_layered_codebook: eta must be > 0");

    const double dt = training.front().dt;
    const double T = training.front().T;

    double max_sup = 0.0;
    for (const TimeChange& f : training) max_sup = std::max(max_sup, sup_norm(f));
    const double xi = std::max(2.0 * max_sup, 1e-12);

    LayeredCodebook result;
    result.plan.smoothness = smoothness;
    result.plan.eta = options.eta;
    result.plan.eps = eps;
    result.plan.xi = xi;

    // shells stop at the first i with eps_i >= xi * s_i
    std::size_t n_shells = 0;
    if (eps < xi)
        n_shells = static_cast<std::size_t>(
            std::ceil(std::log(xi / eps) / options.eta - 1e-12));

    Codebook cb;
    cb.norm = Norm::sup();

    if (options.prune_to_training) {
        std::vector<ShellLattice> lattices;
        lattices.reserve(n_shells);
        for (std::size_t i = 0; i < n_shells; ++i) {
            const double radius = std::exp(static_cast<double>(i));
            const double resolution = eps * std::exp((1.0 + options.eta) * static_cast<double>(i));
            lattices.push_back(shell_lattice(smoothness, radius, resolution, dt));
        }
        std::map<std::pair<std::size_t, std::vector<long long>>, std::size_t> seen;
        for (const TimeChange& f : training) {
            if (n_shells == 0) break;
            const double est = norm_estimate(f, smoothness);
            std::size_t shell = 0;
            while (shell + 1 < n_shells &&
                   std::exp(static_cast<double>(shell)) < est)
                ++shell;
            if (est > std::exp(static_cast<double>(shell))) continue;  // zero covers the overflow
            const ShellLattice& sh = lattices[shell];
            std::vector<long long> units(sh.cells + 1, 0);
            long long prev = 0;
            for (std::size_t j = 1; j <= sh.cells; ++j) {
                const double t = std::min(static_cast<double>(j) * sh.h, 1.0);
                long long u = llround(f.interp(t) / sh.value_step);
                u = std::max({u, prev, 0LL});
                u = std::min(u, sh.value_cap);
                units[j] = u;
                prev = u;
            }
            auto key = std::make_pair(shell, units);
            if (seen.emplace(key, cb.entries.size()).second) {
                if (cb.entries.size() >= options.hard_cap) {
                    std::ostringstream msg;
                    msg << "layered codebook exceeds hard cap " << options.hard_cap;
                    throw BudgetError(msg.str());
                }
                cb.entries.push_back(materialize(units, sh, dt, T));
                result.plan.shells.resize(
                    std::max(result.plan.shells.size(), shell + 1));
            }
        }
        for (std::size_t i = 0; i < result.plan.shells.size(); ++i) {
            const ShellLattice& sh = lattices[i];
            result.plan.shells[i] = {sh.radius, sh.resolution, sh.h, sh.value_step, 0};
        }
    } else {
        for (std::size_t i = 0; i < n_shells; ++i) {
            const double radius = std::exp(static_cast<double>(i));
            const double resolution = eps * std::exp((1.0 + options.eta) * static_cast<double>(i));
            const ShellLattice sh = shell_lattice(smoothness, radius, resolution, dt);
            const double count = count_shell(sh);
            if (count + static_cast<double>(cb.entries.size()) > static_cast<double>(options.hard_cap)) {
                std::ostringstream msg;
                msg << "layered codebook exceeds hard cap " << options.hard_cap
                    << " (shell " << i << " alone counts " << count << ")";
                throw BudgetError(msg.str());
            }
            std::vector<std::vector<long long>> unit_seqs;
            enumerate_shell(sh, options.hard_cap, unit_seqs);
            for (const auto& units : unit_seqs) cb.entries.push_back(materialize(units, sh, dt, T));
            result.plan.shells.push_back(
                {sh.radius, sh.resolution, sh.h, sh.value_step, unit_seqs.size()});
        }
    }

    // ensure the zero function is present exactly once
    bool has_zero = false;
    for (const SampledPath& e : cb.entries) {
        bool all_zero = true;
        for (double v : e.values)
            if (v != 0.0) {
                all_zero = false;
                break;
            }
        if (all_zero) {
            has_zero = true;
            break;
        }
    }
    if (!has_zero) cb.entries.push_back(make_path(1, dt, T));
    cb.contains_zero = true;
    cb.rate = cb.log_size();
    result.cb = std::move(cb);
    return result;
}

LayeredCodebook layered_codebook_for_rate(const std::vector<TimeChange>& training,
                                          double smoothness, double rate,
                                          const LayeredOptions& options) {
    if (rate < 0.0) throw std::invalid_argument("layered_codebook_for_rate: rate must be >= 0");
    const double dt = training.at(0).dt;
    const double budget = std::min(std::exp(rate) + 1.0, static_cast<double>(options.hard_cap));

    double max_sup = 0.0;
    for (const TimeChange& f : training) max_sup = std::max(max_sup, sup_norm(f));
    const double xi = std::max(2.0 * max_sup, 1e-12);

    auto size_at = [&](double eps) -> double {
        try {
            LayeredOptions probe = options;
            LayeredCodebook lc = build_layered_codebook(training, smoothness, eps, probe);
            return static_cast<double>(lc.cb.entries.size());
        } catch (const BudgetError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    double lo = std::max(dt * 1e-3, 1e-7);  // finer than the grid resolves
    double hi = xi;
    if (size_at(lo) <= budget) hi = lo;
    for (int it = 0; it < 48 && hi > lo * 1.0001; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (size_at(mid) <= budget)
            hi = mid;
        else
            lo = mid;
    }
    LayeredCodebook out = build_layered_codebook(training, smoothness, hi, options);
    out.cb.rate = rate;
    return out;
}

TimeChange monotone_regularize(const SampledPath& f) {
    if (f.d != 1) throw std::invalid_argument("monotone_regularize: requires d = 1");
    TimeChange out;
    static_cast<SampledPath&>(out) = f;
    double running = f.values.empty() ? 0.0 : f.values.front();
    for (double& v : out.values) {
        running = std::max(running, v);
        v = running;
    }
    out.monotone = true;
    return out;
}

QuantizedTimeChange quantize_time_change(const TimeChange& phi, const Codebook& cb) {
    if (!cb.contains_zero)
        throw std::invalid_argument("quantize_time_change: codebook must contain the zero path");
    const NearestResult nr = nearest(cb, phi, Norm::sup());
    TimeChange reg = monotone_regularize(cb.entries[nr.index]);

    const double phi_norm = sup_norm(phi);
    double dist = sup_dist(phi, reg);
    std::size_t index = nr.index;
    if (dist > phi_norm) {
        // regularization can only be blamed for the pre-regularization error;
        // fall back to the zero entry so the reconstruction stays regular
        for (std::size_t e = 0; e < cb.entries.size(); ++e) {
            bool all_zero = true;
            for (double v : cb.entries[e].values)
                if (v != 0.0) {
                    all_zero = false;
                    break;
                }
            if (all_zero) {
                index = e;
                break;
            }
        }
        reg = monotone_regularize(cb.entries[index]);
        dist = sup_dist(phi, reg);
    }
    return {std::move(reg), index, dist};
}

double cross_term(const SampledPath& w, const TimeChange& phi, const TimeChange& phi_hat) {
    const std::size_t coding_len = std::min(grid_len(phi.dt, 1.0), phi.len());
    const double horizon = w.T + 1e-9 * std::max(1.0, w.T);
    double worst = 0.0;
    for (std::size_t i = 0; i < coding_len; ++i) {
        const double s1 = phi.values[i];
        const double s2 = phi_hat.interp(phi.t(i));
        if (s1 > horizon || s2 > horizon)
            throw std::out_of_range(
                "cross_term: time change exceeds the Wiener horizon; simulate a longer driver");
        double acc = 0.0;
        for (int k = 0; k < w.d; ++k) {
            const double diff = w.interp(s1, k) - w.interp(s2, k);
            acc += diff * diff;
        }
        worst = std::max(worst, acc);
    }
    return std::sqrt(worst);
}

ModulusReport modulus_tail_estimate(double T, double eps1, double eps2, int n_mc,
                                    std::uint64_t seed) {
    if (!(T > 0.0) || !(eps1 > 0.0) || !(eps2 > 0.0))
        throw std::invalid_argument("modulus_tail_estimate: T, eps1, eps2 must be positive");
    if (eps2 * eps2 < 2.0 * eps1)
        throw std::invalid_argument(
            "modulus_tail_estimate: requires eps2 >= sqrt(2 eps1) (lemma hypothesis)");
    if (n_mc < 1) throw std::invalid_argument("modulus_tail_estimate: n_mc must be >= 1");

    const int n_intervals = static_cast<int>(std::ceil(T / eps1 - 1e-12));
    const double base = 1.0 - 2.0 * std::exp(-eps2 * eps2 / (2.0 * eps1));
    const double bound = base > 0.0 ? std::pow(base, n_intervals) : 0.0;

    const double dt = eps1 / 16.0;
    const std::size_t n = grid_len(dt, T);
    const std::size_t window = static_cast<std::size_t>(std::floor(eps1 / dt + 1e-9));

    int hits = 0;
    std::vector<double> w(n);
    for (int path = 0; path < n_mc; ++path) {
        PathRng rng(seed, static_cast<std::uint64_t>(path));
        w[0] = 0.0;
        const double sqrt_dt = std::sqrt(dt);
        for (std::size_t i = 1; i < n; ++i) w[i] = w[i - 1] + sqrt_dt * rng.normal();

        // sliding-window oscillation via monotone deques
        std::deque<std::size_t> maxq, minq;
        double osc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            while (!maxq.empty() && w[maxq.back()] <= w[i]) maxq.pop_back();
            maxq.push_back(i);
            while (!minq.empty() && w[minq.back()] >= w[i]) minq.pop_back();
            minq.push_back(i);
            if (i >= window) {
                const std::size_t lo = i - window;
                while (maxq.front() < lo) maxq.pop_front();
                while (minq.front() < lo) minq.pop_front();
            }
            osc = std::max(osc, w[maxq.front()] - w[minq.front()]);
            if (osc > 3.0 * eps2) break;
        }
        if (osc <= 3.0 * eps2) ++hits;
    }

    ModulusReport report;
    report.empirical = static_cast<double>(hits) / static_cast<double>(n_mc);
    report.bound = bound;
    report.stderr_ =
        std::sqrt(std::max(report.empirical * (1.0 - report.empirical), 1e-12) / n_mc);
    report.n_intervals = n_intervals;
    report.satisfied = report.empirical >= bound - 3.0 * report.stderr_;
    return report;
}

}  // namespace dq
