#include "dq/wiener.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dq/rng.hpp"

namespace dq {

std::size_t ScalarQuantizer::nearest(double x) const {
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), x);
    return static_cast<std::size_t>(it - boundaries.begin());
}

double Codebook::log_size() const {
    return entries.empty() ? 0.0 : std::log(static_cast<double>(entries.size()));
}

KlBasis kl_basis(int m, double dt) {
    if (m < 1) throw std::invalid_argument("kl_basis: m must be >= 1");
    const std::size_t n = grid_len(dt, 1.0);
    if (static_cast<std::size_t>(m) > n) throw std::invalid_argument("kl_basis: m exceeds grid length");

    KlBasis basis;
    basis.m = m;
    basis.eigenvalues.resize(static_cast<std::size_t>(m));
    basis.paths.reserve(static_cast<std::size_t>(m));
    const double pi = 3.14159265358979323846;
    for (int j = 1; j <= m; ++j) {
        const double freq = (static_cast<double>(j) - 0.5) * pi;
        basis.eigenvalues[static_cast<std::size_t>(j - 1)] = 1.0 / (freq * freq);
        SampledPath e = make_path(1, dt, 1.0);
        for (std::size_t i = 0; i < n; ++i) e.values[i] = std::sqrt(2.0) * std::sin(freq * e.t(i));
        basis.paths.push_back(std::move(e));
    }
    return basis;
}

ScalarQuantizer lloyd_scalar(std::span<const double> samples, int n_levels, double tol,
                             int max_iter) {
    if (samples.empty()) throw std::invalid_argument("lloyd_scalar: samples must be non-empty");
    if (n_levels < 1) throw std::invalid_argument("lloyd_scalar: n_levels must be >= 1");

    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    const std::size_t k = static_cast<std::size_t>(n_levels);

    // prefix sums for O(1) cell means
    std::vector<double> pref(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) pref[i + 1] = pref[i] + xs[i];

    // quantile-spaced initialization
    std::vector<double> levels(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
        levels[j] = xs[std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)))];
    }
    std::sort(levels.begin(), levels.end());

    auto cell_bounds = [&](const std::vector<double>& lv, std::vector<std::size_t>& starts) {
        // starts[j] = first sample index of cell j (cells are contiguous in sorted order)
        starts.assign(k + 1, 0);
        for (std::size_t j = 1; j < k; ++j) {
            const double boundary = (lv[j - 1] + lv[j]) / 2.0;
            starts[j] = static_cast<std::size_t>(
                std::lower_bound(xs.begin(), xs.end(), boundary) - xs.begin());
        }
        starts[k] = n;
    };

    std::vector<std::size_t> starts;
    double prev_mse = std::numeric_limits<double>::infinity();
    double mse = prev_mse;
    for (int it = 0; it < max_iter; ++it) {
        cell_bounds(levels, starts);
        // centroid update; empty cells get re-seeded at the sample farthest
        // from its current codeword
        bool reseeded = false;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t lo = starts[j], hi = starts[j + 1];
            if (hi > lo) {
                levels[j] = (pref[hi] - pref[lo]) / static_cast<double>(hi - lo);
            } else {
                double worst = -1.0;
                std::size_t worst_i = 0;
                for (std::size_t jj = 0; jj < k; ++jj) {
                    for (std::size_t i = starts[jj]; i < starts[jj + 1]; ++i) {
                        const double dev = std::abs(xs[i] - levels[jj]);
                        if (dev > worst) {
                            worst = dev;
                            worst_i = i;
                        }
                    }
                }
                levels[j] = xs[worst_i];
                reseeded = true;
            }
        }
        std::sort(levels.begin(), levels.end());
        cell_bounds(levels, starts);
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = starts[j]; i < starts[j + 1]; ++i) {
                const double diff = xs[i] - levels[j];
                acc += diff * diff;
            }
        mse = acc / static_cast<double>(n);
        if (!reseeded && prev_mse < std::numeric_limits<double>::infinity()) {
            const double rel = std::abs(prev_mse - mse) / std::max(mse, 1e-300);
            if (rel < tol) break;
        }
        prev_mse = mse;
    }

    ScalarQuantizer q;
    q.levels = std::move(levels);
    q.boundaries.resize(k > 0 ? k - 1 : 0);
    for (std::size_t j = 0; j + 1 < k; ++j) q.boundaries[j] = (q.levels[j] + q.levels[j + 1]) / 2.0;
    q.mse = mse;
    return q;
}

int default_kl_m(double rate) {
    return static_cast<int>(std::ceil(std::max(rate, 0.0))) + 2;
}

std::vector<double> standard_normal_sample(int n, std::uint64_t seed) {
    std::vector<double> sample(static_cast<std::size_t>(n));
    PathRng rng(seed, 0x110fd);
    for (double& v : sample) v = rng.normal();
    return sample;
}

namespace {

/// Shared scalar-quantizer source: Lloyd codebooks for the standard normal,
/// one per level count, trained on a fixed seeded sample. Quantizers for
/// N(0, lambda) are the sqrt(lambda)-scaled copies, which is exactly Lloyd
/// on the scaled sample stream.
struct LloydTable {
    std::vector<double> sample;  // sorted N(0,1)
    std::vector<ScalarQuantizer> by_count;  // index = level count

    explicit LloydTable(int n, std::uint64_t seed) {
        sample = standard_normal_sample(n, seed);
        std::sort(sample.begin(), sample.end());
        by_count.resize(2);
        by_count[1] = lloyd_scalar(sample, 1);
    }

    const ScalarQuantizer& at(std::size_t count) {
        while (by_count.size() <= count) by_count.emplace_back();
        if (by_count[count].levels.empty())
            by_count[count] = lloyd_scalar(sample, static_cast<int>(count));
        return by_count[count];
    }

    double mse(std::size_t count) { return at(count).mse; }
};

/// Reverse-waterfilling integer allocation: bisection on theta for the float
/// targets, floor to integers, then greedy refill on exact marginal gains.
std::vector<std::size_t> allocate_levels(double rate, std::span<const double> lambdas,
                                         LloydTable& table) {
    const std::size_t m = lambdas.size();
    std::vector<std::size_t> counts(m, 1);
    if (rate <= 0.0 || m == 0) return counts;

    auto floor_counts = [&](double theta) {
        std::vector<std::size_t> n(m, 1);
        for (std::size_t j = 0; j < m; ++j) {
            const double target = 0.5 * std::log(std::max(lambdas[j], 1e-300) / theta);
            if (target > 0.0) n[j] = std::max<std::size_t>(1, static_cast<std::size_t>(std::exp(target)));
        }
        return n;
    };
    auto log_total = [](const std::vector<std::size_t>& n) {
        double s = 0.0;
        for (std::size_t v : n) s += std::log(static_cast<double>(v));
        return s;
    };

    const double lam_max = *std::max_element(lambdas.begin(), lambdas.end());
    double lo = lam_max * std::exp(-2.0 * rate) * 1e-3, hi = lam_max;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (log_total(floor_counts(mid)) > rate)
            lo = mid;
        else
            hi = mid;
    }
    counts = floor_counts(hi);

    // greedy refill: bump the coordinate with best distortion gain per nat
    double used = log_total(counts);
    while (true) {
        double best_gain = 0.0;
        std::size_t best_j = m;
        for (std::size_t j = 0; j < m; ++j) {
            const double cost = std::log(static_cast<double>(counts[j] + 1)) -
                                std::log(static_cast<double>(counts[j]));
            if (used + cost > rate + 1e-12) continue;
            const double gain =
                lambdas[j] * (table.mse(counts[j]) - table.mse(counts[j] + 1)) / cost;
            if (gain > best_gain) {
                best_gain = gain;
                best_j = j;
            }
        }
        if (best_j >= m) break;
        used += std::log(static_cast<double>(counts[best_j] + 1)) -
                std::log(static_cast<double>(counts[best_j]));
        ++counts[best_j];
    }
    return counts;
}

}  // namespace

Codebook product_codebook(double rate, int m, std::span<const double> eigenvalues,
                          std::uint64_t seed, const ProductCodebookOptions& options) {
    if (rate < 0.0) throw std::invalid_argument("product_codebook: rate must be >= 0");
    if (m < 1) throw std::invalid_argument("product_codebook: m must be >= 1");

    KlBasis basis = kl_basis(m, options.dt);
    std::vector<double> lambdas(eigenvalues.begin(), eigenvalues.end());
    if (lambdas.empty()) lambdas = basis.eigenvalues;
    if (lambdas.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("product_codebook: eigenvalues must have m entries");

    const int d = options.d;
    const std::size_t coords = static_cast<std::size_t>(m) * static_cast<std::size_t>(d);
    // coordinate (j, k): KL index j in state dimension k, eigenvalue lambda_j
    std::vector<double> coord_lambda(coords);
    for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j)
        for (int k = 0; k < d; ++k) coord_lambda[j * static_cast<std::size_t>(d) + k] = lambdas[j];

    Codebook cb;
    cb.norm = options.norm;
    cb.rate = rate;

    LloydTable table(options.samples_per_coord, seed);
    std::vector<std::size_t> counts = allocate_levels(rate, coord_lambda, table);

    std::size_t total = 1;
    for (std::size_t c : counts) {
        if (total > (std::size_t{1} << 40) / std::max<std::size_t>(c, 1))
            throw std::invalid_argument("product_codebook: codebook size overflow");
        total *= c;
    }

    Codebook::ProductStructure prod;
    prod.m = m;
    prod.eigenvalues = lambdas;
    prod.levels.resize(coords);
    prod.strides.resize(coords);
    std::size_t stride = 1;
    for (std::size_t c = 0; c < coords; ++c) {
        prod.levels[c].resize(counts[c]);
        if (total == 1) {
            prod.levels[c][0] = 0.0;  // budget below one split: the {0} codebook
        } else {
            const ScalarQuantizer& std_q = table.at(counts[c]);
            const double scale = std::sqrt(coord_lambda[c]);
            for (std::size_t l = 0; l < counts[c]; ++l) prod.levels[c][l] = scale * std_q.levels[l];
        }
        prod.strides[c] = stride;
        stride *= counts[c];
    }

    if (total == 1) {
        cb.entries.push_back(make_path(d, options.dt, 1.0));
        cb.contains_zero = true;
        cb.product = std::move(prod);
        return cb;
    }

    // materialize all level combinations through the KL basis
    const std::size_t n = basis.paths.front().len();
    cb.entries.reserve(total + 1);
    std::vector<std::size_t> digit(coords, 0);
    for (std::size_t e = 0; e < total; ++e) {
        SampledPath entry = make_path(d, options.dt, 1.0);
        std::size_t rem = e;
        for (std::size_t c = 0; c < coords; ++c) {
            digit[c] = rem % counts[c];
            rem /= counts[c];
        }
        for (std::size_t c = 0; c < coords; ++c) {
            const double level = prod.levels[c][digit[c]];
            if (level == 0.0) continue;
            const std::size_t j = c / static_cast<std::size_t>(d);
            const int k = static_cast<int>(c % static_cast<std::size_t>(d));
            const SampledPath& base = basis.paths[j];
            for (std::size_t i = 0; i < n; ++i) entry.at(i, k) += level * base.values[i];
        }
        cb.entries.push_back(std::move(entry));
    }
    cb.entries.push_back(make_path(d, options.dt, 1.0));  // zero path
    cb.contains_zero = true;
    cb.product = std::move(prod);
    return cb;
}

namespace {

Codebook rescale_common(const Codebook& cb, double T, double target_dt) {
    if (!(T > 0.0)) throw std::invalid_argument("rescale: T must be positive");
    Codebook out;
    out.norm = cb.norm;
    out.contains_zero = cb.contains_zero;
    out.rate = cb.rate;
    out.weights = cb.weights;
    out.entries.reserve(cb.entries.size());
    const double root_t = std::sqrt(T);
    for (const SampledPath& f : cb.entries) {
        const double dt_out = target_dt > 0.0 ? target_dt : f.dt * T;
        SampledPath g = make_path(f.d, dt_out, T);
        for (std::size_t i = 0; i < g.len(); ++i) {
            const double s = g.t(i) / T;
            for (int k = 0; k < f.d; ++k) g.at(i, k) = root_t * f.interp(s, k);
        }
        out.entries.push_back(std::move(g));
    }
    return out;
}

}  // namespace

Codebook rescale_sup(const Codebook& cb, double T, double target_dt) {
    Codebook out = rescale_common(cb, T, target_dt);
    out.norm = Norm::sup();
    return out;
}

Codebook rescale_lq(const Codebook& cb, double T, double q, double target_dt) {
    if (!(q >= 1.0)) throw std::invalid_argument("rescale_lq: q must be >= 1");
    Codebook out = rescale_common(cb, T, target_dt);
    out.norm = Norm::lq(q);
    return out;
}

NearestResult nearest(const Codebook& cb, const SampledPath& path, const Norm& norm) {
    if (cb.entries.empty()) throw std::invalid_argument("nearest: empty codebook");
    check_grid_compatible(cb.entries.front(), path);

    NearestResult best{0, std::numeric_limits<double>::infinity()};
    const std::size_t n = path.len();
    const int d = path.d;

    if (norm.is_sup()) {
        for (std::size_t e = 0; e < cb.entries.size(); ++e) {
            const SampledPath& c = cb.entries[e];
            double worst = 0.0;
            // early abandon once this entry cannot beat the incumbent
            for (std::size_t i = 0; i < n; ++i) {
                double distsq = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double diff = path.at(i, k) - c.at(i, k);
                    distsq += diff * diff;
                }
                if (distsq > worst) {
                    worst = distsq;
                    if (worst >= best.dist * best.dist && best.dist < std::numeric_limits<double>::infinity()) break;
                }
            }
            const double dist = std::sqrt(worst);
            if (dist < best.dist) {
                best.dist = dist;
                best.index = e;
            }
        }
        return best;
    }

    const double q = norm.q;
    for (std::size_t e = 0; e < cb.entries.size(); ++e) {
        const SampledPath& c = cb.entries[e];
        double acc = 0.0;
        const double cap =
            best.dist < std::numeric_limits<double>::infinity() ? std::pow(best.dist, q) : std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double w = (i == 0 || i + 1 == n) ? path.dt / 2.0 : path.dt;
            if (n == 1) w = path.dt;
            double distsq = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = path.at(i, k) - c.at(i, k);
                distsq += diff * diff;
            }
            acc += w * std::pow(std::sqrt(distsq), q);
            if (acc >= cap) break;
        }
        const double dist = std::pow(acc, 1.0 / q);
        if (dist < best.dist) {
            best.dist = dist;
            best.index = e;
        }
    }
    return best;
}

NearestResult product_assign(const Codebook& cb, std::span<const double> coef,
                             double residual_sq) {
    const auto& prod = *cb.product;
    double dist_sq = std::max(residual_sq, 0.0);
    std::size_t index = 0;
    for (std::size_t c = 0; c < prod.levels.size(); ++c) {
        const double x = coef[c];
        const auto& lv = prod.levels[c];
        std::size_t bi = 0;
        double bd = std::numeric_limits<double>::infinity();
        // levels are sorted; binary search then check the neighbor
        const auto it = std::lower_bound(lv.begin(), lv.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - lv.begin());
        for (std::size_t cand : {hi > 0 ? hi - 1 : 0, std::min(hi, lv.size() - 1)}) {
            const double diff = x - lv[cand];
            if (diff * diff < bd) {
                bd = diff * diff;
                bi = cand;
            }
        }
        dist_sq += bd;
        index += bi * prod.strides[c];
    }

    NearestResult best{index, std::sqrt(dist_sq)};
    if (cb.contains_zero && cb.entries.size() > 1) {
        double in_span = 0.0;
        for (double c : coef) in_span += c * c;
        const double zero_dist = std::sqrt(std::max(residual_sq, 0.0) + in_span);
        // zero entry is materialized last
        if (zero_dist < best.dist) best = {cb.entries.size() - 1, zero_dist};
    }
    return best;
}

NearestResult nearest_l2_fast(const Codebook& cb, const SampledPath& path) {
    if (!cb.product) return nearest(cb, path, Norm::lq(2.0));
    if (cb.entries.empty()) throw std::invalid_argument("nearest_l2_fast: empty codebook");
    check_grid_compatible(cb.entries.front(), path);

    const auto& prod = *cb.product;
    const int m = prod.m;
    const int d = path.d;
    const std::size_t n = path.len();
    const double dt = path.dt;

    // trapezoid-weighted projections onto the KL basis, one per coordinate
    const double pi = 3.14159265358979323846;
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = (i == 0 || i + 1 == n) ? dt / 2.0 : dt;
        for (int k = 0; k < d; ++k) norm_sq += w * path.at(i, k) * path.at(i, k);
    }

    std::vector<double> coef(static_cast<std::size_t>(m) * static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < m; ++j) {
        const double freq = (static_cast<double>(j) + 0.5) * pi;
        for (std::size_t i = 0; i < n; ++i) {
            double w = (i == 0 || i + 1 == n) ? dt / 2.0 : dt;
            const double e = std::sqrt(2.0) * std::sin(freq * (static_cast<double>(i) * dt));
            for (int k = 0; k < d; ++k)
                coef[static_cast<std::size_t>(j) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] +=
                    w * e * path.at(i, k);
        }
    }

    double in_span = 0.0;
    for (double c : coef) in_span += c * c;
    return product_assign(cb, coef, norm_sq - in_span);
}

std::size_t VectorCodebook::nearest(std::span<const double> x) const {
    const std::size_t k = size();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = x[j] - centers[c * dim + j];
            acc += diff * diff;
        }
        if (acc < best_d) {
            best_d = acc;
            best = c;
        }
    }
    return best;
}

VectorCodebook finite_dim_codebook(std::span<const double> samples, std::size_t dim, double rate,
                                   std::uint64_t seed, double p, double tol, int max_iter) {
    if (rate < 0.0) throw std::invalid_argument("finite_dim_codebook: rate must be >= 0");
    if (dim == 0 || samples.size() % dim != 0)
        throw std::invalid_argument("finite_dim_codebook: samples must be n x dim");
    const std::size_t n = samples.size() / dim;
    if (n == 0) throw std::invalid_argument("finite_dim_codebook: empty training set");
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::exp(rate)));

    VectorCodebook cb;
    cb.dim = dim;
    cb.p = p;
    cb.centers.assign(std::min(k, n) * dim, 0.0);
    const std::size_t kk = cb.centers.size() / dim;

    // k-means++ style seeding with the substream RNG
    PathRng rng(seed, 0xfd1);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    first = std::min(first, n - 1);
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(first * dim), dim, cb.centers.begin());
    for (std::size_t c = 1; c < kk; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = samples[i * dim + j] - cb.centers[(c - 1) * dim + j];
                acc += diff * diff;
            }
            min_d[i] = std::min(min_d[i], acc);
            total += min_d[i];
        }
        double target = rng.uniform() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= min_d[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
        std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(pick * dim), dim,
                    cb.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }

    std::vector<std::size_t> assign(n, 0);
    std::vector<double> sums(kk * dim, 0.0);
    std::vector<std::size_t> counts(kk, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = cb.nearest(samples.subspan(i * dim, dim));
            assign[i] = c;
            ++counts[c];
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                sums[c * dim + j] += samples[i * dim + j];
                const double diff = samples[i * dim + j] - cb.centers[c * dim + j];
                acc += diff * diff;
            }
            mse += acc;
        }
        mse /= static_cast<double>(n);
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < dim; ++j)
                    cb.centers[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
            } else {
                // empty cell: re-seed at the sample farthest from its codeword
                double worst = -1.0;
                std::size_t worst_i = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < dim; ++j) {
                        const double diff = samples[i * dim + j] - cb.centers[assign[i] * dim + j];
                        acc += diff * diff;
                    }
                    if (acc > worst) {
                        worst = acc;
                        worst_i = i;
                    }
                }
                std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(worst_i * dim), dim,
                            cb.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
            }
        }
        if (prev < std::numeric_limits<double>::infinity() &&
            std::abs(prev - mse) / std::max(mse, 1e-300) < tol)
            break;
        prev = mse;
    }

    // empirical p-th moment distortion on the training set
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = cb.nearest(samples.subspan(i * dim, dim));
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = samples[i * dim + j] - cb.centers[c * dim + j];
            d2 += diff * diff;
        }
        acc += std::pow(std::sqrt(d2), p);
    }
    cb.distortion = std::pow(acc / static_cast<double>(n), 1.0 / p);
    return cb;
}

}  // namespace dq
