#include "dq/lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dq/parallel.hpp"

namespace dq {

std::pair<double, double> empirical_distortion(std::span<const double> errors, double p) {
    if (errors.empty()) throw std::invalid_argument("empirical_distortion: empty error list");
    if (!(p >= 1.0)) throw std::invalid_argument("empirical_distortion: p must be >= 1");
    std::vector<double> powers(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i] < 0.0) throw std::invalid_argument("empirical_distortion: negative error");
        powers[i] = std::pow(errors[i], p);
    }
    const double n = static_cast<double>(errors.size());
    const double mean = pairwise_sum(powers) / n;
    const double dist = std::pow(mean, 1.0 / p);
    if (errors.size() == 1) return {dist, std::numeric_limits<double>::quiet_NaN()};

    double var = 0.0;
    for (double v : powers) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    const double se_mean = std::sqrt(var / n);
    // delta method through x -> x^(1/p)
    const double se = mean > 0.0 ? se_mean * std::pow(mean, 1.0 / p - 1.0) / p : 0.0;
    return {dist, se};
}

double sigma_norm_moment(const std::vector<PathBundle>& bundles, double p, double rho) {
    if (bundles.empty()) throw std::invalid_argument("sigma_norm_moment: empty ensemble");
    if (!(p >= 1.0)) throw std::invalid_argument("sigma_norm_moment: p must be >= 1");
    if (!(rho > 0.0 && rho <= 2.0)) throw std::invalid_argument("sigma_norm_moment: rho in (0,2]");

    std::vector<double> norms(bundles.size());
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        const TimeChange& phi = bundles[b].phi;
        const double dt = phi.dt;
        const std::size_t n1 = grid_len(dt, 1.0);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n1; ++i) {
            const double sig2 = std::max(0.0, (phi.values[i + 1] - phi.values[i]) / dt);
            acc += dt * std::pow(std::sqrt(sig2), rho);
        }
        norms[b] = std::pow(acc, p / rho);
    }
    return std::pow(pairwise_sum(norms) / static_cast<double>(bundles.size()), 1.0 / p);
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::wiener_l2: return "wiener-l2";
        case Scheme::wiener_sup: return "wiener-sup";
        case Scheme::sup: return "sup";
        case Scheme::lp: return "lp";
    }
    return "?";
}

namespace {

struct ProjectionCache {
    int m_max = 0;
    std::vector<double> coefs;     // n_paths x (m_max * d), coordinate-major
    std::vector<double> norms_sq;  // grid L2 norm squared per path

    void build(const std::vector<PathBundle>& bundles, int m_max_in, int workers) {
        m_max = m_max_in;
        const SampledPath& proto = bundles.front().x;
        const double dt = proto.dt;
        const int d = proto.d;
        const std::size_t n1 = grid_len(dt, 1.0);
        const double pi = 3.14159265358979323846;

        // basis matrix on the coding window
        std::vector<double> basis(static_cast<std::size_t>(m_max) * n1);
        for (int j = 0; j < m_max; ++j) {
            const double freq = (static_cast<double>(j) + 0.5) * pi;
            for (std::size_t i = 0; i < n1; ++i)
                basis[static_cast<std::size_t>(j) * n1 + i] =
                    std::sqrt(2.0) * std::sin(freq * static_cast<double>(i) * dt);
        }

        const std::size_t width = static_cast<std::size_t>(m_max) * static_cast<std::size_t>(d);
        coefs.assign(bundles.size() * width, 0.0);
        norms_sq.assign(bundles.size(), 0.0);
        parallel_for(bundles.size(), workers, [&](std::size_t b) {
            const SampledPath& x = bundles[b].x;
            double nsq = 0.0;
            for (std::size_t i = 0; i < n1; ++i) {
                double w = (i == 0 || i + 1 == n1) ? dt / 2.0 : dt;
                for (int k = 0; k < d; ++k) nsq += w * x.at(i, k) * x.at(i, k);
            }
            norms_sq[b] = nsq;
            for (int j = 0; j < m_max; ++j) {
                for (int k = 0; k < d; ++k) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n1; ++i) {
                        double w = (i == 0 || i + 1 == n1) ? dt / 2.0 : dt;
                        acc += w * basis[static_cast<std::size_t>(j) * n1 + i] * x.at(i, k);
                    }
                    coefs[b * width + static_cast<std::size_t>(j) * static_cast<std::size_t>(d) +
                          static_cast<std::size_t>(k)] = acc;
                }
            }
        });
    }
};

DistortionReport make_report(double rate, double log_size, double p, const Norm& norm,
                             std::span<const double> errors) {
    auto [dist, se] = empirical_distortion(errors, p);
    DistortionReport rep;
    rep.rate = rate;
    rep.codebook_log_size = log_size;
    rep.p = p;
    rep.norm = norm;
    rep.distortion = dist;
    rep.stderr_ = se;
    rep.sqrt_r_times_d = std::sqrt(rate) * dist;
    rep.n_paths = static_cast<int>(errors.size());
    return rep;
}

}  // namespace

std::vector<DistortionReport> rate_distortion_curve(const CurveRequest& request) {
    if (request.rates.empty()) throw std::invalid_argument("rate_distortion_curve: no rates");
    for (std::size_t i = 1; i < request.rates.size(); ++i)
        if (request.rates[i] <= request.rates[i - 1])
            throw std::invalid_argument("rate_distortion_curve: rates must be increasing");

    const std::vector<PathBundle> bundles = simulate_ensemble(
        request.spec, request.x0, request.dt, request.T, request.n_paths, request.seed,
        {1.0, request.workers});

    std::vector<DistortionReport> curve;
    curve.reserve(request.rates.size());
    const int d = request.spec.d;

    if (request.scheme == Scheme::wiener_l2) {
        const double max_rate = request.rates.back();
        ProjectionCache cache;
        cache.build(bundles, default_kl_m(max_rate), request.workers);
        const std::size_t width =
            static_cast<std::size_t>(cache.m_max) * static_cast<std::size_t>(d);

        for (double rate : request.rates) {
            ProductCodebookOptions pc;
            pc.samples_per_coord = request.samples_per_coord;
            pc.d = d;
            pc.dt = request.dt;
            pc.norm = Norm::lq(2.0);
            const int m = default_kl_m(rate);
            Codebook cb = product_codebook(rate, m, {}, request.seed, pc);

            std::vector<double> errors(bundles.size());
            const std::size_t mw = static_cast<std::size_t>(m) * static_cast<std::size_t>(d);
            parallel_for(bundles.size(), request.workers, [&](std::size_t b) {
                std::span<const double> coef(cache.coefs.data() + b * width, mw);
                double in_span = 0.0;
                for (double c : coef) in_span += c * c;
                errors[b] = product_assign(cb, coef, cache.norms_sq[b] - in_span).dist;
            });
            curve.push_back(make_report(rate, cb.log_size(), request.p, Norm::lq(2.0), errors));
        }
        return curve;
    }

    if (request.scheme == Scheme::wiener_sup) {
        std::vector<SampledPath> x1(bundles.size());
        for (std::size_t b = 0; b < bundles.size(); ++b) x1[b] = slice_to(bundles[b].x, 1.0);
        for (double rate : request.rates) {
            ProductCodebookOptions pc;
            pc.samples_per_coord = request.samples_per_coord;
            pc.d = d;
            pc.dt = request.dt;
            pc.norm = Norm::sup();
            Codebook cb = product_codebook(rate, default_kl_m(rate), {}, request.seed, pc);
            std::vector<double> errors(bundles.size());
            parallel_for(bundles.size(), request.workers, [&](std::size_t b) {
                errors[b] = nearest(cb, x1[b], Norm::sup()).dist;
            });
            curve.push_back(make_report(rate, cb.log_size(), request.p, Norm::sup(), errors));
        }
        return curve;
    }

    // full pipeline schemes
    const bool lp = request.scheme == Scheme::lp;
    for (double rate : request.rates) {
        EncodingBudget budget = lp ? EncodingBudget::for_lp(rate, request.spec.beta, d, request.policy)
                                   : EncodingBudget::for_sup(rate, request.spec.beta, request.policy);
        if (request.n_blocks > 0) budget.n_blocks = request.n_blocks;

        CodebookSetOptions opts;
        opts.phi_smoothness = request.phi_smoothness;
        opts.samples_per_coord = request.samples_per_coord;
        opts.wiener_norm = lp ? Norm::lq(request.q) : Norm::sup();
        opts.p = request.p;
        opts.lp_extras = lp;
        opts.seed = request.seed;
        const CodebookSet cbs = build_codebook_set(bundles, budget, opts);

        std::vector<double> errors(bundles.size());
        double rate_used = 0.0;
        std::vector<Reconstruction> first(1);
        parallel_for(bundles.size(), request.workers, [&](std::size_t b) {
            Reconstruction rec = lp ? encode_lp(bundles[b], budget, request.p, cbs)
                                    : encode_sup(bundles[b], budget, cbs);
            errors[b] = rec.total_error;
            if (b == 0) first[0] = std::move(rec);
        });
        rate_used = first[0].rate_used;
        curve.push_back(make_report(rate, rate_used, request.p,
                                    lp ? Norm::lq(request.p) : Norm::sup(), errors));
    }
    return curve;
}

CurveFit fit_sqrt_constant(std::span<const DistortionReport> curve, double tail_fraction) {
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw std::invalid_argument("fit_sqrt_constant: tail_fraction in (0,1]");
    const std::size_t n = curve.size();
    const std::size_t tail = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
    if (tail > n) throw std::invalid_argument("fit_sqrt_constant: need at least 3 tail points");

    CurveFit fit;
    fit.points.assign(curve.begin() + static_cast<std::ptrdiff_t>(n - tail), curve.end());
    double mean_logc = 0.0;
    for (const DistortionReport& r : fit.points) {
        if (!(r.distortion > 0.0))
            throw std::invalid_argument("fit_sqrt_constant: distortions must be positive");
        mean_logc += std::log(r.distortion) + 0.5 * std::log(r.rate);
    }
    mean_logc /= static_cast<double>(fit.points.size());
    fit.fitted_constant = std::exp(mean_logc);

    double ss = 0.0;
    for (const DistortionReport& r : fit.points) {
        const double resid = std::log(r.distortion) - (mean_logc - 0.5 * std::log(r.rate));
        ss += resid * resid;
    }
    fit.fit_residual = std::sqrt(ss / static_cast<double>(fit.points.size()));

    // free-slope diagnostic
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const DistortionReport& r : fit.points) {
        const double x = std::log(r.rate), y = std::log(r.distortion);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double nn = static_cast<double>(fit.points.size());
    const double denom = nn * sxx - sx * sx;
    fit.free_slope = denom != 0.0 ? (nn * sxy - sx * sy) / denom : 0.0;
    fit.free_constant = std::exp((sy - fit.free_slope * sx) / nn);
    return fit;
}

HolderMomentReport holder_moment_check(const std::vector<PathBundle>& bundles, double alpha,
                                       double kappa, std::size_t seminorm_points, int workers) {
    if (bundles.empty()) throw std::invalid_argument("holder_moment_check: empty ensemble");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("holder_moment_check: alpha in (0, 1/2)");
    if (!(kappa > 0.0)) throw std::invalid_argument("holder_moment_check: kappa must be positive");

    HolderMomentReport rep;
    rep.alpha = alpha;
    rep.kappa = kappa;
    rep.admissible = kappa > 2.0 / (1.0 - 2.0 * alpha);

    std::vector<double> m_powers(bundles.size());
    parallel_for(bundles.size(), workers, [&](std::size_t b) {
        const SampledPath m1 = slice_to(bundles[b].m, 1.0);
        m_powers[b] = std::pow(holder_seminorm(m1, alpha, seminorm_points), kappa);
    });
    const double n = static_cast<double>(bundles.size());
    rep.m_moment = pairwise_sum(m_powers) / n;
    double var = 0.0;
    for (double v : m_powers) var += (v - rep.m_moment) * (v - rep.m_moment);
    rep.stderr_ = bundles.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;

    std::vector<double> sig_ints(bundles.size());
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        const TimeChange& phi = bundles[b].phi;
        const double dt = phi.dt;
        const std::size_t n1 = grid_len(dt, 1.0);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n1; ++i) {
            const double sig2 = std::max(0.0, (phi.values[i + 1] - phi.values[i]) / dt);
            acc += dt * std::pow(std::sqrt(sig2), kappa);
        }
        sig_ints[b] = acc;
    }
    rep.sigma_integral = pairwise_sum(sig_ints) / n;

    if (rep.m_moment == 0.0) {
        rep.ratio = 0.0;
        rep.moment_ratio = 0.0;
    } else if (rep.sigma_integral > 0.0) {
        rep.ratio = rep.m_moment / rep.sigma_integral;
        rep.moment_ratio = std::pow(rep.ratio, 1.0 / kappa);
    } else {
        rep.ratio = std::numeric_limits<double>::infinity();
        rep.moment_ratio = std::numeric_limits<double>::infinity();
    }
    return rep;
}

}  // namespace dq
