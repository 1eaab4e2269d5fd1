#include "dq/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "dq/codec.hpp"
#include "dq/holder.hpp"
#include "dq/io.hpp"
#include "dq/lab.hpp"
#include "dq/parallel.hpp"
#include "dq/rng.hpp"
#include "dq/sde.hpp"
#include "dq/wiener.hpp"

namespace dq {

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

int scaled(int n, double scale) { return std::max(16, static_cast<int>(n * scale)); }

DiffusionSpec wiener_spec() {
    DiffusionSpec s;
    s.d = 1;
    s.L = 2.0;
    s.beta = 1.0;
    s.b = [](std::span<const double>, double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    s.sigma = [](std::span<const double>, double) { return 1.0; };
    return s;
}

DiffusionSpec const_sigma_spec(double c) {
    DiffusionSpec s = wiener_spec();
    s.L = std::max(2.0, c + 1.0);
    s.sigma = [c](std::span<const double>, double) { return c; };
    return s;
}

DiffusionSpec ou_spec() {
    DiffusionSpec s;
    s.d = 1;
    s.L = 3.0;
    s.beta = 1.0;
    s.b = [](std::span<const double> x, double, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
    };
    s.sigma = [](std::span<const double>, double) { return 1.0; };
    return s;
}

DiffusionSpec sin_sigma_spec() {
    DiffusionSpec s = ou_spec();
    s.sigma = [](std::span<const double> x, double) { return 1.0 + 0.5 * std::sin(x[0]); };
    return s;
}

DiffusionSpec bump_sigma_spec(double eps, double kappa) {
    // sigma_t = 1_{[0,eps]}(t) eps^(-1/kappa), state-independent
    DiffusionSpec s = wiener_spec();
    const double level = std::pow(eps, -1.0 / kappa);
    s.L = level + 1.0;
    s.sigma = [eps, level](std::span<const double>, double t) { return t < eps ? level : 0.0; };
    return s;
}

CheckResult run_check(const std::string& name, const std::function<std::string()>& body) {
    Timer timer;
    CheckResult res;
    res.name = name;
    try {
        res.detail = body();
        res.pass = true;
    } catch (const std::exception& e) {
        res.pass = false;
        res.detail = e.what();
    }
    res.seconds = timer.seconds();
    return res;
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// criterion 1: L2 Wiener constant via product codebooks
std::string check_l2_constant(const VerifyOptions& o) {
    CurveRequest req;
    req.spec = wiener_spec();
    req.x0 = {0.0};
    req.dt = 1.0 / 512.0;
    req.T = 1.0;
    req.n_paths = scaled(20000, o.scale);
    req.seed = o.seed;
    req.scheme = Scheme::wiener_l2;
    req.p = 2.0;
    req.workers = o.workers;
    for (int k = 4; k <= 12; ++k) req.rates.push_back(std::log(std::pow(2.0, k)));

    const auto curve = rate_distortion_curve(req);
    const double target = std::sqrt(2.0) / 3.14159265358979323846;
    const DistortionReport& top = curve.back();
    const double rel = std::abs(top.sqrt_r_times_d - target) / target;

    std::ostringstream detail;
    detail << "sqrt(r)D at k=12 = " << fmt(top.sqrt_r_times_d) << " (target " << fmt(target)
           << ", rel err " << fmt(rel) << ")";
    if (rel > 0.25) fail(detail.str() + " exceeds 25%");

    // decreasing toward the constant over the last 4 points, within MC slack
    for (std::size_t i = curve.size() - 3; i < curve.size(); ++i) {
        const double slack = 3.0 * std::hypot(curve[i].stderr_ * std::sqrt(curve[i].rate),
                                              curve[i - 1].stderr_ * std::sqrt(curve[i - 1].rate));
        if (curve[i].sqrt_r_times_d > curve[i - 1].sqrt_r_times_d + slack)
            fail(detail.str() + "; sqrt(r)D rose from " + fmt(curve[i - 1].sqrt_r_times_d) +
                 " to " + fmt(curve[i].sqrt_r_times_d) + " beyond MC slack " + fmt(slack));
    }
    detail << ", last four: ";
    for (std::size_t i = curve.size() - 4; i < curve.size(); ++i)
        detail << fmt(curve[i].sqrt_r_times_d) << " ";
    return detail.str();
}

// criterion 2: sup-norm lower bracket
std::string check_sup_bracket(const VerifyOptions& o) {
    CurveRequest req;
    req.spec = wiener_spec();
    req.x0 = {0.0};
    req.dt = 1.0 / 512.0;
    req.T = 1.0;
    req.n_paths = scaled(3000, o.scale);
    req.seed = o.seed;
    req.scheme = Scheme::wiener_sup;
    req.p = 2.0;
    req.workers = o.workers;
    for (int k = 8; k <= 12; k += 2) req.rates.push_back(std::log(std::pow(2.0, k)));

    const auto curve = rate_distortion_curve(req);
    const DistortionReport& top = curve.back();
    const double lower = 3.14159265358979323846 / std::sqrt(8.0);
    const double slack = 3.0 * top.stderr_ * std::sqrt(top.rate);
    std::ostringstream detail;
    detail << "sup-norm sqrt(r)D = " << fmt(top.sqrt_r_times_d) << " vs bracket floor "
           << fmt(lower) << " - " << fmt(slack);
    if (top.sqrt_r_times_d < lower - slack) fail(detail.str());
    return detail.str();
}

// criterion 3: sigma-ratio law in sup norm
std::string check_sigma_ratio(const VerifyOptions& o) {
    const double top_rate = std::log(4096.0);
    auto pipeline_top = [&](const DiffusionSpec& spec, double T) {
        CurveRequest req;
        req.spec = spec;
        req.x0 = {0.0};
        req.dt = 1.0 / 512.0;
        req.T = T;
        req.n_paths = scaled(2000, o.scale);
        req.seed = o.seed;
        req.scheme = Scheme::sup;
        req.p = 2.0;
        req.workers = o.workers;
        req.rates = {top_rate};
        return rate_distortion_curve(req).back().distortion;
    };

    const double d_w = pipeline_top(wiener_spec(), 3.0);
    const double d_2 = pipeline_top(const_sigma_spec(2.0), 6.0);
    const double ratio2 = d_2 / d_w;
    std::ostringstream detail;
    detail << "sigma=2 ratio " << fmt(ratio2) << " (window [1.7, 2.3])";
    if (ratio2 < 1.7 || ratio2 > 2.3) fail(detail.str());

    // OU drift with sigma(x) = 1 + 0.5 sin(x): ratio vs the independently
    // computed moment E[||sigma||_{L2}^p]^{1/p}
    const DiffusionSpec sin_spec = sin_sigma_spec();
    const auto moment_bundles = simulate_ensemble(sin_spec, std::vector<double>{0.0}, 1.0 / 512.0,
                                                  4.0, scaled(4000, o.scale), o.seed + 7,
                                                  {1.0, o.workers});
    const double moment = sigma_norm_moment(moment_bundles, 2.0, 2.0);
    const double d_sin = pipeline_top(sin_spec, 4.0);
    const double ratio_sin = d_sin / d_w;
    const double rel = std::abs(ratio_sin - moment) / moment;
    detail << "; sin-sigma ratio " << fmt(ratio_sin) << " vs moment " << fmt(moment)
           << " (rel err " << fmt(rel) << ")";
    if (rel > 0.25) fail(detail.str());
    return detail.str();
}

// criterion 4: finite-dimensional quantization decay exponent
std::string check_finite_dim_decay(const VerifyOptions& o) {
    const std::size_t dim = 2;
    const std::size_t n = static_cast<std::size_t>(scaled(100000, o.scale));
    std::vector<double> samples(n * dim);
    PathRng rng(o.seed, 0xf1d);
    for (double& v : samples) v = rng.normal();

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    std::ostringstream detail;
    for (int k = 1; k <= 8; ++k) {
        const double rate = std::log(std::pow(2.0, k));
        VectorCodebook cb = finite_dim_codebook(samples, dim, rate, o.seed + k, 2.0);
        sx += rate;
        sy += std::log(cb.distortion);
        sxx += rate * rate;
        sxy += rate * std::log(cb.distortion);
        ++count;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    detail << "log D vs r slope = " << fmt(slope) << " (window [-0.6, -0.4], theory -1/m = -0.5)";
    if (slope < -0.6 || slope > -0.4) fail(detail.str());
    return detail.str();
}

// criterion 5: regular reconstruction on every sample
std::string check_regular_reconstruction(const VerifyOptions& o) {
    const int n_paths = scaled(10000, o.scale);
    const auto bundles = simulate_ensemble(ou_spec(), std::vector<double>{0.0}, 1.0 / 512.0, 3.0,
                                           n_paths, o.seed + 5, {1.0, o.workers});
    std::vector<TimeChange> phis(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        static_cast<SampledPath&>(phis[i]) = slice_to(bundles[i].phi, 1.0);
        phis[i].monotone = true;
    }
    LayeredOptions opts;
    opts.prune_to_training = true;
    const Codebook cb = layered_codebook_for_rate(phis, 1.4, 4.0, opts).cb;

    std::vector<int> ok(bundles.size(), 0);
    parallel_for(bundles.size(), o.workers, [&](std::size_t i) {
        const QuantizedTimeChange qtc = quantize_time_change(phis[i], cb);
        bool monotone = qtc.phi_hat.monotone;
        for (std::size_t j = 1; j < qtc.phi_hat.len() && monotone; ++j)
            if (qtc.phi_hat.values[j] < qtc.phi_hat.values[j - 1]) monotone = false;
        ok[i] = (qtc.dist <= sup_norm(phis[i]) + 1e-12 && monotone) ? 1 : 0;
    });
    std::size_t good = 0;
    for (int v : ok) good += static_cast<std::size_t>(v);
    std::ostringstream detail;
    detail << good << "/" << bundles.size() << " samples regular and monotone";
    if (good != bundles.size()) fail(detail.str());
    return detail.str();
}

// criterion 6: modulus of continuity lemma
std::string check_modulus(const VerifyOptions& o) {
    const int n_mc = scaled(10000, o.scale);
    const double triples[3][3] = {{1.0, 0.01, 0.2}, {1.0, 0.04, 0.3}, {2.0, 0.01, 0.25}};
    std::ostringstream detail;
    for (const auto& t : triples) {
        const ModulusReport rep = modulus_tail_estimate(t[0], t[1], t[2], n_mc, o.seed + 11);
        detail << "(" << t[0] << "," << t[1] << "," << t[2] << "): emp " << fmt(rep.empirical)
               << " >= bound " << fmt(rep.bound) << " - 3se; ";
        if (!rep.satisfied) fail(detail.str() + "violated");
    }
    return detail.str();
}

// criterion 7: Hoelder moment admissibility contrast
std::string check_holder_moments(const VerifyOptions& o) {
    const int n_paths = scaled(800, o.scale);
    const double eps_family[3] = {1.0, 0.25, 0.0625};
    const double alpha = 0.2;

    auto ratios_for = [&](double kappa) {
        std::vector<double> out;
        for (double eps : eps_family) {
            // common random numbers across the family: same seed
            const auto bundles =
                simulate_ensemble(bump_sigma_spec(eps, kappa), std::vector<double>{0.0},
                                  1.0 / 4096.0, 1.0, n_paths, o.seed + 13, {1.0, o.workers});
            const HolderMomentReport rep = holder_moment_check(bundles, alpha, kappa, 0, o.workers);
            out.push_back(rep.moment_ratio);
        }
        return out;
    };

    const std::vector<double> admissible = ratios_for(5.0);
    double lo = admissible[0], hi = admissible[0];
    for (double v : admissible) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::ostringstream detail;
    detail << "kappa=5 ratios: " << fmt(admissible[0]) << " " << fmt(admissible[1]) << " "
           << fmt(admissible[2]) << " (spread " << fmt(hi / lo) << ")";
    if (hi / lo >= 2.0) fail(detail.str() + " exceeds factor 2");

    const std::vector<double> inadmissible = ratios_for(3.0);
    detail << "; kappa=3 ratios: " << fmt(inadmissible[0]) << " " << fmt(inadmissible[1]) << " "
           << fmt(inadmissible[2]);
    if (!(inadmissible[0] < inadmissible[1] && inadmissible[1] < inadmissible[2]))
        fail(detail.str() + " not strictly increasing");
    return detail.str();
}

// criterion 8: exact invariants at unit scale
std::string check_exact_invariants(const VerifyOptions& o) {
    std::ostringstream detail;

    // rescale round trip
    {
        ProductCodebookOptions pc;
        pc.samples_per_coord = 20000;
        Codebook cb = product_codebook(std::log(16.0), 4, {}, o.seed, pc);
        Codebook fwd = rescale_sup(cb, 4.0);
        Codebook back = rescale_sup(fwd, 0.25);
        double worst = 0.0;
        for (std::size_t e = 0; e < cb.entries.size(); ++e)
            worst = std::max(worst, sup_dist(cb.entries[e], back.entries[e]));
        if (worst > 1e-8) fail("rescale round-trip drift " + fmt(worst));
        detail << "rescale round-trip " << fmt(worst) << "; ";
    }

    // scale equivariance of empirical_distortion
    {
        std::vector<double> errs = {0.5, 1.25, 2.0, 0.125};
        std::vector<double> scaled_errs = errs;
        for (double& e : scaled_errs) e *= 3.0;
        const double a = empirical_distortion(errs, 3.0).first;
        const double b = empirical_distortion(scaled_errs, 3.0).first;
        if (std::abs(b - 3.0 * a) > 1e-10) fail("distortion scale equivariance");
        detail << "distortion equivariance ok; ";
    }

    // allocate_rates hand cases
    {
        const auto r1 = allocate_rates(std::vector<double>{1.0}, 100.0, 2.0);
        if (std::abs(r1[0] - 100.0) > 1e-10) fail("allocate_rates n=1");
        const auto r4 = allocate_rates(std::vector<double>{1, 1, 1, 1}, 100.0, 2.0);
        for (double r : r4)
            if (std::abs(r - 25.0) > 1e-10) fail("allocate_rates symmetric");
        const auto r2 = allocate_rates(std::vector<double>{1.0, 4.0}, 100.0, 2.0);
        if (std::abs(r2[0] - 100.0 / 3.0) > 1e-9 || std::abs(r2[1] - 200.0 / 3.0) > 1e-9)
            fail("allocate_rates (1,4) weights");
        detail << "allocate_rates ok; ";
    }

    // generalized entropy uniform cases
    {
        std::vector<double> u(8, 1.0 / 8.0);
        if (std::abs(generalized_entropy(u, 1.0) - std::log(8.0)) > 1e-10)
            fail("entropy uniform p=1");
        if (std::abs(generalized_entropy(u, 3.0) - std::pow(std::log(8.0), 3.0)) > 1e-10)
            fail("entropy uniform p=3");
        detail << "entropy ok; ";
    }

    // nearest vs exhaustive oracle
    {
        ProductCodebookOptions pc;
        pc.samples_per_coord = 20000;
        Codebook cb = product_codebook(std::log(64.0), 5, {}, o.seed, pc);
        PathRng rng(o.seed, 0xabc);
        int mismatches = 0;
        for (int trial = 0; trial < 100; ++trial) {
            SampledPath path = make_path(1, pc.dt, 1.0);
            double w = 0.0;
            const double sq = std::sqrt(pc.dt);
            for (std::size_t i = 1; i < path.len(); ++i) {
                w += sq * rng.normal();
                path.values[i] = w;
            }
            const NearestResult fast = nearest_l2_fast(cb, path);
            NearestResult brute{0, std::numeric_limits<double>::infinity()};
            for (std::size_t e = 0; e < cb.entries.size(); ++e) {
                const double dist = lq_dist(path, cb.entries[e], 2.0);
                if (dist < brute.dist) brute = {e, dist};
            }
            const NearestResult scan = nearest(cb, path, Norm::lq(2.0));
            if (scan.index != brute.index || fast.index != brute.index) ++mismatches;
        }
        if (mismatches > 0) fail("nearest mismatches: " + std::to_string(mismatches));
        detail << "nearest oracle 100/100; ";
    }

    // monotone regularize vs prefix max
    {
        PathRng rng(o.seed, 0xdef);
        SampledPath f = make_path(1, 1.0 / 64.0, 1.0);
        for (std::size_t i = 1; i < f.len(); ++i)
            f.values[i] = f.values[i - 1] + rng.normal() * 0.1;
        const TimeChange reg = monotone_regularize(f);
        double running = f.values[0];
        for (std::size_t i = 0; i < f.len(); ++i) {
            running = std::max(running, f.values[i]);
            if (std::abs(reg.values[i] - running) > 1e-15) fail("monotone_regularize prefix max");
        }
        detail << "regularize ok; ";
    }

    // Lloyd two-level Gaussian
    {
        const std::vector<double> sample = standard_normal_sample(1000000, o.seed);
        const ScalarQuantizer q = lloyd_scalar(sample, 2);
        const double level = std::sqrt(2.0 / 3.14159265358979323846);
        const double mse = 1.0 - 2.0 / 3.14159265358979323846;
        if (std::abs(std::abs(q.levels[0]) - level) / level > 0.01 ||
            std::abs(std::abs(q.levels[1]) - level) / level > 0.01)
            fail("Lloyd 2-level levels " + fmt(q.levels[0]) + "," + fmt(q.levels[1]));
        if (std::abs(q.mse - mse) / mse > 0.01) fail("Lloyd 2-level mse " + fmt(q.mse));
        detail << "lloyd 2-level ok";
    }

    return detail.str();
}

// criterion 9: cross-term trend against the time-change error
std::string check_cross_term_trend(const VerifyOptions& o) {
    const int n_paths = scaled(1500, o.scale);
    const auto bundles = simulate_ensemble(ou_spec(), std::vector<double>{0.0}, 1.0 / 512.0, 3.0,
                                           n_paths, o.seed + 17, {1.0, o.workers});
    std::vector<TimeChange> phis(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        static_cast<SampledPath&>(phis[i]) = slice_to(bundles[i].phi, 1.0);
        phis[i].monotone = true;
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    std::ostringstream detail;
    detail << "(d, cross): ";
    for (double rate : {1.5, 2.5, 3.5, 4.5}) {
        LayeredOptions opts;
        opts.prune_to_training = true;
        const Codebook cb = layered_codebook_for_rate(phis, 1.4, rate, opts).cb;
        std::vector<double> d2(bundles.size()), c2(bundles.size());
        parallel_for(bundles.size(), o.workers, [&](std::size_t i) {
            const QuantizedTimeChange qtc = quantize_time_change(phis[i], cb);
            d2[i] = qtc.dist * qtc.dist;
            const double horizon =
                std::max({phis[i].values.back(), qtc.phi_hat.values.back(), bundles[i].x.dt});
            const SampledPath w = intrinsic_wiener(bundles[i], bundles[i].x.dt, horizon);
            const double cross = cross_term(w, phis[i], qtc.phi_hat);
            c2[i] = cross * cross;
        });
        const double d = std::sqrt(pairwise_sum(d2) / n_paths);
        const double cross = std::sqrt(pairwise_sum(c2) / n_paths);
        detail << "(" << fmt(d) << ", " << fmt(cross) << ") ";
        if (d <= 0.0 || cross <= 0.0) continue;
        const double x = std::log(d), y = std::log(cross);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 3) fail("degenerate sweep: " + detail.str());
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    detail << "slope " << fmt(slope) << " (window [0.35, 0.65])";
    if (slope < 0.35 || slope > 0.65) fail(detail.str());
    return detail.str();
}

}  // namespace

std::vector<CheckResult> run_acceptance_checks(const VerifyOptions& options) {
    std::vector<CheckResult> results;
    const std::string scale_note =
        options.scale < 1.0 ? " [scaled " + fmt(options.scale) + "]" : "";
    auto add = [&](const std::string& name, const std::function<std::string()>& body) {
        CheckResult r = run_check(name, body);
        r.detail += scale_note;
        results.push_back(std::move(r));
    };
    add("A1 L2 wiener constant", [&] { return check_l2_constant(options); });
    add("A2 sup-norm bracket", [&] { return check_sup_bracket(options); });
    add("A3 sigma ratio law", [&] { return check_sigma_ratio(options); });
    add("A4 finite-dim decay", [&] { return check_finite_dim_decay(options); });
    add("A5 regular reconstruction", [&] { return check_regular_reconstruction(options); });
    add("A6 modulus lemma", [&] { return check_modulus(options); });
    add("A7 holder moments", [&] { return check_holder_moments(options); });
    add("A8 exact invariants", [&] { return check_exact_invariants(options); });
    add("A9 cross-term trend", [&] { return check_cross_term_trend(options); });
    return results;
}

std::vector<CheckResult> run_property_checks(const ExperimentConfig& config,
                                             const VerifyOptions& options) {
    std::vector<CheckResult> results;

    results.push_back(run_check("P1 regular reconstruction (config preset)", [&] {
        const int n = std::min(config.n_paths, 2000);
        const auto bundles = simulate_ensemble(config.make_spec(), config.x0, config.dt,
                                               config.T, n, config.seed, {1.0, options.workers});
        std::vector<TimeChange> phis(bundles.size());
        for (std::size_t i = 0; i < bundles.size(); ++i) {
            static_cast<SampledPath&>(phis[i]) = slice_to(bundles[i].phi, 1.0);
            phis[i].monotone = true;
        }
        LayeredOptions opts;
        opts.prune_to_training = true;
        const Codebook cb = layered_codebook_for_rate(phis, config.phi_smoothness, 3.0, opts).cb;
        for (std::size_t i = 0; i < phis.size(); ++i) {
            const QuantizedTimeChange qtc = quantize_time_change(phis[i], cb);
            if (qtc.dist > sup_norm(phis[i]) + 1e-12)
                throw std::runtime_error("regular reconstruction violated at path " +
                                         std::to_string(i));
        }
        return std::to_string(phis.size()) + " samples regular";
    }));

    results.push_back(run_check("P2 rate accounting", [&] {
        const int n = std::min(config.n_paths, 200);
        const auto bundles = simulate_ensemble(config.make_spec(), config.x0, config.dt,
                                               config.T, n, config.seed, {1.0, options.workers});
        const double rate = config.rates.empty() ? std::log(256.0) : config.rates.back();
        BudgetPolicy policy;
        policy.gamma1 = config.gamma1;
        policy.gamma3 = config.gamma3;
        policy.slack = config.slack;
        EncodingBudget budget = EncodingBudget::for_sup(rate, config.beta, policy);
        CodebookSetOptions opts;
        opts.phi_smoothness = config.phi_smoothness;
        opts.samples_per_coord = std::min(config.samples_per_coord, 20000);
        opts.wiener_norm = Norm::sup();
        opts.seed = config.seed;
        const CodebookSet cbs = build_codebook_set(bundles, budget, opts);
        for (const PathBundle& b : bundles) {
            const Reconstruction rec = encode_sup(b, budget, cbs);
            if (rec.rate_used > budget.r * (1.0 + budget.slack) + 1e-9)
                throw std::runtime_error("rate_used " + fmt(rec.rate_used) + " over budget");
        }
        return "rate_used within r(1+slack) on " + std::to_string(n) + " paths";
    }));

    results.push_back(run_check("P3 curve monotonicity", [&] {
        CurveRequest req = config.make_curve_request();
        req.n_paths = std::min(req.n_paths, 2000);
        if (req.rates.empty()) req.rates = {std::log(16.0), std::log(64.0), std::log(256.0)};
        const auto curve = rate_distortion_curve(req);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double slack =
                3.0 * std::hypot(curve[i].stderr_, curve[i - 1].stderr_);
            if (curve[i].distortion > curve[i - 1].distortion + slack)
                throw std::runtime_error("distortion rose at rate " + fmt(curve[i].rate));
        }
        return std::to_string(curve.size()) + " points nonincreasing (3se slack)";
    }));

    results.push_back(run_check("P4 rerun determinism", [&] {
        CurveRequest req = config.make_curve_request();
        req.n_paths = std::min(req.n_paths, 500);
        req.rates = {std::log(64.0)};
        const auto a = rate_distortion_curve(req);
        const auto b = rate_distortion_curve(req);
        if (a.size() != b.size() || a[0].distortion != b[0].distortion ||
            a[0].stderr_ != b[0].stderr_)
            throw std::runtime_error("rerun differs");
        return "identical curves on rerun";
    }));

    return results;
}

std::string format_check_table(const std::vector<CheckResult>& results) {
    std::size_t width = 4;
    for (const CheckResult& r : results) width = std::max(width, r.name.size());
    std::ostringstream out;
    for (const CheckResult& r : results) {
        out << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
        for (std::size_t i = r.name.size(); i < width + 2; ++i) out << ' ';
        out << "(" << fmt(r.seconds) << "s) " << r.detail << "\n";
    }
    return out.str();
}

}  // namespace dq
