#include "dq/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "dq/rng.hpp"

namespace dq {

EncodingBudget EncodingBudget::for_sup(double r, double beta, const BudgetPolicy& policy) {
    EncodingBudget b;
    b.r = r;
    b.r_wiener = r;
    b.r_phi = std::pow(r, policy.resolve_gamma1(beta));
    b.r_drift = std::pow(r, policy.gamma3);
    b.delta_r = 0.0;
    b.n_blocks = 1;
    b.slack = policy.slack;
    return b;
}

EncodingBudget EncodingBudget::for_lp(double r, double beta, int d, const BudgetPolicy& policy) {
    EncodingBudget b = for_sup(r, beta, policy);
    b.n_blocks = default_n_blocks(r);
    b.delta_r = std::sqrt(std::max(r, 0.0));
    // anchor plus per-arc offsets cost (2dn + 1) sqrt(r) in the full scheme
    (void)d;
    return b;
}

void EncodingBudget::validate() const {
    auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
    if (bad(r) || bad(r_phi) || bad(r_drift) || bad(r_wiener) || bad(delta_r))
        throw std::invalid_argument("EncodingBudget: components must be finite and nonnegative");
    if (n_blocks < 1) throw std::invalid_argument("EncodingBudget: n_blocks must be >= 1");
    const double total = r_phi + r_drift + r_wiener + delta_r;
    if (total > r * (1.0 + slack) + 1e-9) {
        std::ostringstream msg;
        msg << "EncodingBudget: components sum to " << total << " > r(1+slack) = "
            << r * (1.0 + slack);
        throw std::invalid_argument(msg.str());
    }
}

int default_n_blocks(double rate) {
    return std::max(1, static_cast<int>(std::ceil(std::cbrt(std::max(rate, 0.0)))));
}

const Codebook& CodebookSet::ladder_at(double rate) const {
    if (wiener_ladder.empty()) throw std::invalid_argument("CodebookSet: empty wiener ladder");
    const Codebook* best = &wiener_ladder.front();
    for (const Codebook& cb : wiener_ladder)
        if (cb.rate <= rate + 1e-9 && cb.rate >= best->rate) best = &cb;
    return *best;
}

namespace {

/// Nearest entry of a unit-interval codebook against w-nodes on the same
/// unit grid, with the entry scaled by `scale`. Sup norm, early abandon.
NearestResult nearest_scaled_sup(const Codebook& unit, const SampledPath& w_unit, double scale) {
    NearestResult best{0, std::numeric_limits<double>::infinity()};
    const std::size_t n = w_unit.len();
    const int d = w_unit.d;
    for (std::size_t e = 0; e < unit.entries.size(); ++e) {
        const SampledPath& c = unit.entries[e];
        double worst = 0.0;
        const double cap = best.dist * best.dist;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = w_unit.at(i, k) - scale * c.at(i, k);
                acc += diff * diff;
            }
            if (acc > worst) {
                worst = acc;
                if (worst >= cap) break;
            }
        }
        if (worst < cap) {
            best.dist = std::sqrt(worst);
            best.index = e;
        }
    }
    return best;
}

void slice_time_change(const TimeChange& phi, double T, TimeChange& out) {
    static_cast<SampledPath&>(out) = slice_to(phi, T);
    out.monotone = phi.monotone;
}

}  // namespace

Reconstruction encode_sup(const PathBundle& bundle, const EncodingBudget& budget,
                          const CodebookSet& cbs) {
    budget.validate();
    if (cbs.phi_cb.entries.empty() || !cbs.phi_cb.contains_zero)
        throw std::invalid_argument("encode_sup: phi codebook missing or lacks the zero entry");
    if (cbs.drift_cb.entries.empty())
        throw std::invalid_argument("encode_sup: drift codebook missing");

    const double dt = bundle.x.dt;
    const int d = bundle.x.d;

    TimeChange phi1;
    slice_time_change(bundle.phi, 1.0, phi1);
    const SampledPath x1 = slice_to(bundle.x, 1.0);
    const SampledPath a1 = slice_to(bundle.a, 1.0);

    // stage 1: time change
    QuantizedTimeChange qtc = quantize_time_change(phi1, cbs.phi_cb);
    const double tau = qtc.phi_hat.values.back();

    // stage 2: drift in sup norm
    const NearestResult drift_nr = nearest(cbs.drift_cb, a1, Norm::sup());
    const SampledPath& a_hat = cbs.drift_cb.entries[drift_nr.index];

    // stage 3: conditional Wiener coding on [0, tau]
    const Codebook& unit = cbs.ladder_at(budget.r_wiener);
    const double s_need = std::max({phi1.values.back(), tau, dt});
    const SampledPath w = intrinsic_wiener(bundle, dt, s_need);

    Reconstruction rec;
    rec.phi_hat = qtc.phi_hat;
    rec.indices = {qtc.index, drift_nr.index, 0};
    rec.stages.drift = drift_nr.dist;
    rec.stages.cross = cross_term(w, phi1, qtc.phi_hat);

    const SampledPath& proto = unit.entries.front();
    SampledPath x_hat = make_path(d, dt, 1.0);
    if (tau > 1e-12) {
        // resample W onto the unit grid of the codebook, stretched to [0,tau]
        SampledPath w_unit = make_path(d, proto.dt, 1.0);
        for (std::size_t i = 0; i < w_unit.len(); ++i) {
            const double s = w_unit.t(i) * tau;
            for (int k = 0; k < d; ++k) w_unit.at(i, k) = w.interp(s, k);
        }
        const double scale = std::sqrt(tau);
        const NearestResult wnr = nearest_scaled_sup(unit, w_unit, scale);
        rec.indices[2] = wnr.index;
        rec.stages.wiener = wnr.dist;
        const SampledPath& w_cw = unit.entries[wnr.index];
        for (std::size_t i = 0; i < x_hat.len(); ++i) {
            const double u = std::min(qtc.phi_hat.values[i] / tau, 1.0);
            for (int k = 0; k < d; ++k) x_hat.at(i, k) = a_hat.at(i, k) + scale * w_cw.interp(u, k);
        }
    } else {
        // degenerate time change: X_hat = A_hat
        rec.stages.wiener = 0.0;
        for (std::size_t i = 0; i < x_hat.len(); ++i)
            for (int k = 0; k < d; ++k) x_hat.at(i, k) = a_hat.at(i, k);
    }

    rec.total_error = sup_dist(x1, x_hat);
    rec.x_hat = std::move(x_hat);
    rec.rate_used = cbs.phi_cb.log_size() + cbs.drift_cb.log_size() + unit.log_size();
    return rec;
}

namespace {

/// Slope lattice of one Cameron-Martin shell on the unit horizon.
struct DriftShell {
    double radius = 1.0;
    double resolution = 0.2;
    std::size_t cells = 1;
    double h = 1.0;
    double slope_step = 0.2;  // quantization step for per-cell slopes
    long long slope_cap = 1;  // |slope| bound in steps
};

DriftShell drift_shell(double radius, double resolution) {
    DriftShell sh;
    sh.radius = radius;
    sh.resolution = resolution;
    sh.cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(radius / resolution)));
    sh.h = 1.0 / static_cast<double>(sh.cells);
    sh.slope_step = resolution;
    sh.slope_cap = static_cast<long long>(
        std::ceil(radius / (std::sqrt(sh.h) * sh.slope_step)));
    return sh;
}

void enumerate_drift_shell(const DriftShell& sh, std::size_t cap,
                           std::vector<std::vector<long long>>& out) {
    std::vector<long long> slopes(sh.cells, 0);
    const double energy_cap = sh.radius * sh.radius * (1.0 + 1e-9);
    auto rec = [&](auto&& self, std::size_t step, double energy) -> void {
        if (out.size() > cap) return;
        if (step == sh.cells) {
            out.push_back(slopes);
            return;
        }
        for (long long g = -sh.slope_cap; g <= sh.slope_cap; ++g) {
            const double gv = static_cast<double>(g) * sh.slope_step;
            const double ne = energy + gv * gv * sh.h;
            if (ne > energy_cap) continue;
            slopes[step] = g;
            self(self, step + 1, ne);
            if (out.size() > cap) return;
        }
    };
    rec(rec, 0, 0.0);
}

double count_drift_shell(const DriftShell& sh, std::size_t cap) {
    std::vector<std::vector<long long>> seqs;
    enumerate_drift_shell(sh, cap, seqs);
    return seqs.size() > cap ? 1e18 : static_cast<double>(seqs.size());
}

SampledPath materialize_drift(std::span<const long long> slopes, const DriftShell& sh, int d,
                              int component, double dt, double T, SampledPath* accum) {
    // single-component variant when accum == nullptr; otherwise adds into accum
    SampledPath local = accum ? SampledPath{} : make_path(d, dt, T);
    SampledPath& out = accum ? *accum : local;
    const double root_t = std::sqrt(T);
    const std::size_t n = out.len();
    // node values of the unit-horizon piecewise-linear function
    std::vector<double> nodes(sh.cells + 1, 0.0);
    for (std::size_t j = 0; j < sh.cells; ++j)
        nodes[j + 1] = nodes[j] + static_cast<double>(slopes[j]) * sh.slope_step * sh.h;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = std::min(out.t(i) / T, 1.0);
        const double pos = u / sh.h;
        const std::size_t cell = std::min(static_cast<std::size_t>(pos), sh.cells - 1);
        const double frac = pos - static_cast<double>(cell);
        const double v = nodes[cell] + (nodes[cell + 1] - nodes[cell]) * std::min(frac, 1.0);
        out.at(i, component) += root_t * v;
    }
    return local;
}

}  // namespace

Codebook drift_quantizer(const std::vector<SampledPath>& a_paths, double rate, double T,
                         const DriftQuantizerOptions& options) {
    if (a_paths.empty()) throw std::invalid_argument("drift_quantizer: empty training set");
    if (rate < 0.0) throw std::invalid_argument("drift_quantizer: rate must be >= 0");
    const double dt = a_paths.front().dt;
    const int d = a_paths.front().d;

    // discrete H-norms on the unit horizon (pi_T scaling divides by sqrt(T))
    std::vector<double> h_norms;
    h_norms.reserve(a_paths.size());
    for (std::size_t i = 0; i < a_paths.size(); ++i) {
        for (double v : a_paths[i].values)
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "drift_quantizer: path " << i << " has non-finite values (infinite H-norm)";
                throw std::invalid_argument(msg.str());
            }
        h_norms.push_back(discrete_h_norm(a_paths[i]) / std::sqrt(T));
    }
    const double xi = std::max(2.0 * *std::max_element(h_norms.begin(), h_norms.end()), 1e-9);

    const double eta = 0.5;
    const double budget = std::min(std::exp(rate) + 1.0, static_cast<double>(options.hard_cap));

    auto build_at = [&](double eps, bool materialize_entries) -> Codebook {
        std::size_t n_shells = 0;
        if (eps < xi)
            n_shells = static_cast<std::size_t>(std::ceil(std::log(xi / eps) / eta - 1e-12));
        Codebook cb;
        cb.norm = Norm::sup();
        cb.rate = rate;

        std::vector<DriftShell> shells;
        for (std::size_t i = 0; i < n_shells; ++i)
            shells.push_back(drift_shell(std::exp(static_cast<double>(i)),
                                         eps * std::exp((1.0 + eta) * static_cast<double>(i))));

        if (options.prune_to_training) {
            std::map<std::vector<long long>, std::size_t> seen;
            for (std::size_t pi = 0; pi < a_paths.size(); ++pi) {
                if (n_shells == 0) break;
                std::size_t shell = 0;
                while (shell + 1 < n_shells && std::exp(static_cast<double>(shell)) < h_norms[pi])
                    ++shell;
                if (h_norms[pi] > std::exp(static_cast<double>(shell))) continue;
                const DriftShell& sh = shells[shell];
                // per-cell average slopes of the unit-horizon rescaled path,
                // rounded to the slope lattice
                std::vector<long long> key;
                key.reserve(sh.cells * static_cast<std::size_t>(d) + 1);
                key.push_back(static_cast<long long>(shell));
                const SampledPath& a = a_paths[pi];
                for (int k = 0; k < d; ++k) {
                    for (std::size_t j = 0; j < sh.cells; ++j) {
                        const double u0 = static_cast<double>(j) * sh.h * T;
                        const double u1 = static_cast<double>(j + 1) * sh.h * T;
                        const double slope =
                            (a.interp(u1, k) - a.interp(u0, k)) / (sh.h * std::sqrt(T));
                        long long g = llround(slope / sh.slope_step);
                        g = std::clamp(g, -sh.slope_cap, sh.slope_cap);
                        key.push_back(g);
                    }
                }
                if (seen.emplace(key, cb.entries.size()).second) {
                    if (cb.entries.size() >= options.hard_cap)
                        throw BudgetError("drift_quantizer: codebook exceeds hard cap");
                    if (materialize_entries) {
                        SampledPath entry = make_path(d, dt, T);
                        for (int k = 0; k < d; ++k)
                            materialize_drift(std::span<const long long>(key).subspan(
                                                  1 + static_cast<std::size_t>(k) * sh.cells, sh.cells),
                                              sh, d, k, dt, T, &entry);
                        cb.entries.push_back(std::move(entry));
                    } else {
                        cb.entries.emplace_back();
                    }
                }
            }
        } else {
            if (d != 1)
                throw std::invalid_argument(
                    "drift_quantizer: enumerated Cameron-Martin nets support d = 1; use pruning");
            for (const DriftShell& sh : shells) {
                std::vector<std::vector<long long>> seqs;
                enumerate_drift_shell(sh, options.hard_cap, seqs);
                if (seqs.size() + cb.entries.size() > options.hard_cap)
                    throw BudgetError("drift_quantizer: codebook exceeds hard cap");
                for (const auto& slopes : seqs) {
                    if (materialize_entries)
                        cb.entries.push_back(materialize_drift(slopes, sh, 1, 0, dt, T, nullptr));
                    else
                        cb.entries.emplace_back();
                }
            }
        }

        bool has_zero = false;
        for (const SampledPath& e : cb.entries) {
            if (!materialize_entries) break;
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
        if (!has_zero || !materialize_entries) cb.entries.push_back(make_path(d, dt, T));
        cb.contains_zero = true;
        return cb;
    };

    auto size_at = [&](double eps) -> double {
        try {
            return static_cast<double>(build_at(eps, false).entries.size());
        } catch (const BudgetError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    double lo = 1e-7, hi = xi;
    if (size_at(lo) <= budget) hi = lo;
    for (int it = 0; it < 48 && hi > lo * 1.0001; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (size_at(mid) <= budget)
            hi = mid;
        else
            lo = mid;
    }
    return build_at(hi, true);
}

std::vector<double> allocate_rates(std::span<const double> delta_tau, double r, double p) {
    if (!(r > 0.0)) throw std::invalid_argument("allocate_rates: r must be positive");
    if (!(p >= 1.0)) throw std::invalid_argument("allocate_rates: p must be >= 1");
    const double expo = p / (p + 2.0);
    const double floor_rate = std::sqrt(r);

    double total_weight = 0.0;
    std::vector<double> weights(delta_tau.size(), 0.0);
    for (std::size_t i = 0; i < delta_tau.size(); ++i) {
        if (delta_tau[i] < 0.0)
            throw std::invalid_argument("allocate_rates: delta_tau must be nonnegative");
        weights[i] = std::pow(delta_tau[i], expo);
        total_weight += weights[i];
    }

    std::vector<double> rates(delta_tau.size(), floor_rate);
    if (total_weight > 0.0)
        for (std::size_t i = 0; i < rates.size(); ++i)
            rates[i] = std::max(weights[i] / total_weight * r, floor_rate);
    return rates;
}

Codebook adapt_codebook_to_measure(const Codebook& cb, std::span<const double> nu, double delta_r,
                                   std::span<const double> offset_samples,
                                   const std::vector<SampledPath>& probe_paths,
                                   const AdaptOptions& options) {
    if (cb.entries.empty()) throw std::invalid_argument("adapt_codebook_to_measure: empty codebook");
    if (cb.norm.is_sup())
        throw std::invalid_argument("adapt_codebook_to_measure: codebook must carry an L^q tag");
    if (delta_r < 0.0) throw std::invalid_argument("adapt_codebook_to_measure: delta_r must be >= 0");
    const SampledPath& proto = cb.entries.front();
    const std::size_t n = proto.len();
    if (nu.size() != n)
        throw std::invalid_argument("adapt_codebook_to_measure: nu must live on the codebook grid");
    const int d = proto.d;
    const double q = cb.norm.q;

    double mass = 0.0;
    for (double w : nu) {
        if (w < 0.0) throw std::invalid_argument("adapt_codebook_to_measure: nu must be nonnegative");
        mass += w;
    }
    if (mass <= 0.0) return cb;  // zero-mass measure: nothing to adapt

    // rotation offset search on a grid of candidates, averaging the best-entry
    // distortion of the base codebook over the probe paths
    const int candidates = std::max(1, options.rotation_candidates);
    std::size_t best_shift = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int c = 0; c < candidates; ++c) {
        const std::size_t shift = (n * static_cast<std::size_t>(c)) / static_cast<std::size_t>(candidates);
        double score = 0.0;
        for (const SampledPath& probe : probe_paths) {
            double best_entry = std::numeric_limits<double>::infinity();
            for (const SampledPath& entry : cb.entries) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    // theta_t pulls nu back by the shift
                    const double w = nu[(i + shift) % n];
                    if (w == 0.0) continue;
                    double dist2 = 0.0;
                    for (int k = 0; k < d; ++k) {
                        const double diff = probe.interp(proto.t(i), k) - entry.at(i, k);
                        dist2 += diff * diff;
                    }
                    acc += w * std::pow(std::sqrt(dist2), q);
                }
                best_entry = std::min(best_entry, acc);
            }
            score += best_entry;
        }
        if (score < best_score) {
            best_score = score;
            best_shift = shift;
        }
    }

    // endpoint offset quantizer on the provided 2d-vector samples
    VectorCodebook offsets = finite_dim_codebook(offset_samples, 2 * static_cast<std::size_t>(d),
                                                 delta_r, options.seed, q);

    Codebook out;
    out.norm = cb.norm;
    out.rate = cb.rate + delta_r;
    out.entries.reserve(cb.entries.size() * offsets.size());
    for (const SampledPath& entry : cb.entries) {
        for (std::size_t oc = 0; oc < offsets.size(); ++oc) {
            SampledPath rotated = make_path(d, proto.dt, proto.T);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t src = (i + best_shift) % n;
                const bool wrapped = i + best_shift >= n;
                for (int k = 0; k < d; ++k) {
                    const double off =
                        offsets.centers[oc * offsets.dim + static_cast<std::size_t>(k) +
                                        (wrapped ? static_cast<std::size_t>(d) : 0)];
                    rotated.at(i, k) = entry.at(src, k) + off;
                }
            }
            out.entries.push_back(std::move(rotated));
        }
    }
    out.contains_zero = false;
    for (const SampledPath& e : out.entries) {
        bool all_zero = true;
        for (double v : e.values)
            if (v != 0.0) {
                all_zero = false;
                break;
            }
        if (all_zero) {
            out.contains_zero = true;
            break;
        }
    }
    return out;
}

Reconstruction encode_lp(const PathBundle& bundle, const EncodingBudget& budget, double p,
                         const CodebookSet& cbs) {
    budget.validate();
    if (!(p >= 1.0)) throw std::invalid_argument("encode_lp: p must be >= 1");
    if (cbs.phi_cb.entries.empty() || cbs.drift_cb.entries.empty())
        throw std::invalid_argument("encode_lp: codebook set incomplete");

    const double dt = bundle.x.dt;
    const int d = bundle.x.d;
    const int n_blocks = budget.n_blocks;

    TimeChange phi1;
    slice_time_change(bundle.phi, 1.0, phi1);
    const SampledPath x1 = slice_to(bundle.x, 1.0);
    const SampledPath a1 = slice_to(bundle.a, 1.0);

    QuantizedTimeChange qtc = quantize_time_change(phi1, cbs.phi_cb);
    const NearestResult drift_nr = nearest(cbs.drift_cb, a1, Norm::sup());
    const SampledPath& a_hat = cbs.drift_cb.entries[drift_nr.index];

    const double tau = qtc.phi_hat.values.back();
    const double s_need = std::max({phi1.values.back(), tau, dt});
    const SampledPath w = intrinsic_wiener(bundle, dt, s_need);

    Reconstruction rec;
    rec.phi_hat = qtc.phi_hat;
    rec.indices = {qtc.index, drift_nr.index};
    rec.stages.drift = drift_nr.dist;
    rec.stages.cross = cross_term(w, phi1, qtc.phi_hat);
    rec.rate_used = cbs.phi_cb.log_size() + cbs.drift_cb.log_size();

    // block boundaries tau_i = phi_hat(i/n)
    std::vector<double> tau_pts(static_cast<std::size_t>(n_blocks) + 1, 0.0);
    for (int i = 0; i <= n_blocks; ++i)
        tau_pts[static_cast<std::size_t>(i)] =
            qtc.phi_hat.interp(static_cast<double>(i) / static_cast<double>(n_blocks));
    std::vector<double> delta_tau(static_cast<std::size_t>(n_blocks), 0.0);
    for (int i = 0; i < n_blocks; ++i)
        delta_tau[static_cast<std::size_t>(i)] =
            std::max(0.0, tau_pts[static_cast<std::size_t>(i) + 1] - tau_pts[static_cast<std::size_t>(i)]);

    // anchor process W'' on the interior boundaries
    std::vector<double> anchor_hat(static_cast<std::size_t>(n_blocks) * static_cast<std::size_t>(d), 0.0);
    if (n_blocks > 1 && cbs.anchor_cb) {
        std::vector<double> anchors(static_cast<std::size_t>(n_blocks - 1) * static_cast<std::size_t>(d));
        for (int i = 1; i < n_blocks; ++i)
            for (int k = 0; k < d; ++k)
                anchors[static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(d) +
                        static_cast<std::size_t>(k)] = w.interp(tau_pts[static_cast<std::size_t>(i)], k);
        const std::size_t a_idx = cbs.anchor_cb->nearest(anchors);
        rec.indices.push_back(a_idx);
        rec.rate_used += std::log(static_cast<double>(cbs.anchor_cb->size()));
        for (int i = 1; i < n_blocks; ++i)
            for (int k = 0; k < d; ++k)
                anchor_hat[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) +
                           static_cast<std::size_t>(k)] =
                    cbs.anchor_cb->centers[a_idx * cbs.anchor_cb->dim +
                                           static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(d) +
                                           static_cast<std::size_t>(k)];
    } else {
        rec.indices.push_back(0);
    }

    rec.block_rates = allocate_rates(delta_tau, budget.r_wiener, p);
    rec.block_errors.assign(static_cast<std::size_t>(n_blocks), 0.0);

    // per-block coding of W' in L^p(nu_i), evaluated in t-space where the
    // block measure is just dt on ((i-1)/n, i/n]
    const std::size_t n1 = x1.len();
    SampledPath x_hat = make_path(d, dt, 1.0);
    for (int i = 0; i < d; ++i) x_hat.at(0, i) = a_hat.at(0, i);

    std::vector<std::size_t> node_block(n1, 0);
    for (std::size_t j = 0; j < n1; ++j) {
        const double t = x1.t(j);
        int blk = static_cast<int>(std::ceil(t * n_blocks - 1e-12)) - 1;
        node_block[j] = static_cast<std::size_t>(std::clamp(blk, 0, n_blocks - 1));
    }

    for (int i = 0; i < n_blocks; ++i) {
        const std::size_t bi = static_cast<std::size_t>(i);
        const double t0 = tau_pts[bi];
        const double dtau = delta_tau[bi];
        const Codebook& rung = cbs.ladder_at(rec.block_rates[bi]);
        const double scale = std::sqrt(std::max(dtau, 0.0));

        // W' within the block, relative to the reconstructed anchor
        std::vector<std::size_t> nodes;
        for (std::size_t j = 1; j < n1; ++j)
            if (node_block[j] == bi) nodes.push_back(j);

        std::size_t best_e = 0;
        double best_mass = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < rung.entries.size(); ++e) {
            const SampledPath& c = rung.entries[e];
            double mass = 0.0;
            for (std::size_t j : nodes) {
                const double s = qtc.phi_hat.values[j];
                const double u = dtau > 1e-15 ? std::clamp((s - t0) / dtau, 0.0, 1.0) : 0.0;
                double dist2 = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double target = w.interp(s, k) -
                                          anchor_hat[bi * static_cast<std::size_t>(d) +
                                                     static_cast<std::size_t>(k)];
                    const double diff = target - scale * c.interp(u, k);
                    dist2 += diff * diff;
                }
                mass += dt * std::pow(std::sqrt(dist2), p);
                if (mass >= best_mass) break;
            }
            if (mass < best_mass) {
                best_mass = mass;
                best_e = e;
            }
        }
        rec.indices.push_back(best_e);
        rec.block_errors[bi] = best_mass;
        rec.rate_used += rung.log_size();

        const SampledPath& c = rung.entries[best_e];
        for (std::size_t j : nodes) {
            const double s = qtc.phi_hat.values[j];
            const double u = dtau > 1e-15 ? std::clamp((s - t0) / dtau, 0.0, 1.0) : 0.0;
            for (int k = 0; k < d; ++k)
                x_hat.at(j, k) = a_hat.at(j, k) +
                                 anchor_hat[bi * static_cast<std::size_t>(d) +
                                            static_cast<std::size_t>(k)] +
                                 scale * c.interp(u, k);
        }
    }

    rec.stages.wiener = std::pow(
        std::accumulate(rec.block_errors.begin(), rec.block_errors.end(), 0.0), 1.0 / p);
    rec.total_error = lq_dist(x1, x_hat, p);
    rec.x_hat = std::move(x_hat);
    return rec;
}

double generalized_entropy(std::span<const double> weights, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("generalized_entropy: p must be >= 1");
    double total = 0.0;
    double acc = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("generalized_entropy: negative weight");
        total += w;
        if (w > 0.0) acc += w * std::pow(std::log(1.0 / w), p);
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("generalized_entropy: weights must sum to 1");
    return acc;
}

CodebookSet build_codebook_set(const std::vector<PathBundle>& training,
                               const EncodingBudget& budget, const CodebookSetOptions& options) {
    if (training.empty()) throw std::invalid_argument("build_codebook_set: empty training ensemble");
    const double dt = training.front().x.dt;
    const int d = training.front().x.d;

    CodebookSet set;

    // phi codebook on the coding window
    std::vector<TimeChange> phi_train;
    phi_train.reserve(training.size());
    for (const PathBundle& b : training) {
        TimeChange t1;
        static_cast<SampledPath&>(t1) = slice_to(b.phi, 1.0);
        t1.monotone = true;
        phi_train.push_back(std::move(t1));
    }
    LayeredOptions phi_opts;
    phi_opts.eta = options.phi_eta;
    phi_opts.hard_cap = options.hard_cap;
    phi_opts.prune_to_training = options.prune_phi;
    set.phi_cb = layered_codebook_for_rate(phi_train, options.phi_smoothness, budget.r_phi,
                                           phi_opts)
                     .cb;

    // drift codebook
    std::vector<SampledPath> a_train;
    a_train.reserve(training.size());
    for (const PathBundle& b : training) a_train.push_back(slice_to(b.a, 1.0));
    DriftQuantizerOptions drift_opts;
    drift_opts.hard_cap = options.hard_cap;
    drift_opts.prune_to_training = options.prune_drift;
    set.drift_cb = drift_quantizer(a_train, budget.r_drift, 1.0, drift_opts);

    // unit-interval Wiener ladder
    ProductCodebookOptions pc;
    pc.samples_per_coord = options.samples_per_coord;
    pc.d = d;
    pc.dt = dt;
    pc.norm = options.wiener_norm;
    std::vector<double> rungs;
    if (options.lp_extras) {
        const double lowest = std::max(1.0, std::sqrt(budget.r_wiener) - 1.0);
        for (double r = lowest; r < budget.r_wiener - 1e-9; r += options.ladder_step)
            rungs.push_back(r);
    }
    rungs.push_back(budget.r_wiener);
    for (double r : rungs)
        set.wiener_ladder.push_back(product_codebook(r, default_kl_m(r), {}, options.seed, pc));

    // fixed rotation probes
    for (int i = 0; i < 8; ++i) {
        PathRng rng(options.seed, 0xb10c + static_cast<std::uint64_t>(i));
        SampledPath probe = make_path(d, dt, 1.0);
        const double sq = std::sqrt(dt);
        for (std::size_t j = 1; j < probe.len(); ++j)
            for (int k = 0; k < d; ++k)
                probe.at(j, k) = probe.at(j - 1, k) + sq * rng.normal();
        set.probe_paths.push_back(std::move(probe));
    }

    if (options.lp_extras && budget.n_blocks > 1) {
        // anchors from the training ensemble under the quantized time changes
        const int n = budget.n_blocks;
        std::vector<double> anchor_samples;
        anchor_samples.reserve(training.size() * static_cast<std::size_t>((n - 1) * d));
        for (const PathBundle& b : training) {
            TimeChange phi1;
            static_cast<SampledPath&>(phi1) = slice_to(b.phi, 1.0);
            phi1.monotone = true;
            QuantizedTimeChange qtc = quantize_time_change(phi1, set.phi_cb);
            const double tau = qtc.phi_hat.values.back();
            const double horizon = b.phi.values.back();
            SampledPath w = intrinsic_wiener(b, dt, std::max(std::min(tau, horizon), dt));
            for (int i = 1; i < n; ++i) {
                const double s =
                    std::min(qtc.phi_hat.interp(static_cast<double>(i) / n), w.T);
                for (int k = 0; k < d; ++k) anchor_samples.push_back(w.interp(s, k));
            }
        }
        set.anchor_cb = finite_dim_codebook(anchor_samples, static_cast<std::size_t>((n - 1) * d),
                                            budget.delta_r, options.seed, options.p);

        // endpoint offset samples (-W_t, W_1 - W_t) with t uniform
        PathRng rng(options.seed, 0x0ff5e7);
        const std::size_t n_off = 20000;
        std::vector<double> offset_samples;
        offset_samples.reserve(n_off * 2 * static_cast<std::size_t>(d));
        for (std::size_t i = 0; i < n_off; ++i) {
            const double t = rng.uniform();
            for (int k = 0; k < d; ++k) offset_samples.push_back(-std::sqrt(t) * rng.normal());
            for (int k = 0; k < d; ++k)
                offset_samples.push_back(std::sqrt(std::max(1.0 - t, 0.0)) * rng.normal());
        }
        set.offset_cb = finite_dim_codebook(offset_samples, 2 * static_cast<std::size_t>(d),
                                            budget.delta_r, options.seed, options.p);
    }

    return set;
}

}  // namespace dq
