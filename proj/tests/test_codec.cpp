#include "doctest.h"
#include "dq/codec.hpp"
#include "dq/rng.hpp"

#include <cmath>
#include <numeric>

using namespace dq;

namespace {

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

DiffusionSpec ou_sin_spec() {
    DiffusionSpec s = wiener_spec();
    s.L = 3.0;
    s.b = [](std::span<const double> x, double, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
    };
    s.sigma = [](std::span<const double> x, double) { return 1.0 + 0.5 * std::sin(x[0]); };
    return s;
}

}  // namespace

TEST_CASE("allocate_rates") {
    SUBCASE("single block gets the whole rate") {
        const auto r = allocate_rates(std::vector<double>{0.7}, 100.0, 2.0);
        CHECK(r.size() == 1);
        CHECK(r[0] == doctest::Approx(100.0));
    }
    SUBCASE("symmetric blocks split evenly") {
        const auto r = allocate_rates(std::vector<double>{1, 1, 1, 1}, 100.0, 2.0);
        for (double v : r) CHECK(v == doctest::Approx(25.0));
    }
    SUBCASE("(1,4) at p=2 weights as (1,2)") {
        const auto r = allocate_rates(std::vector<double>{1.0, 4.0}, 100.0, 2.0);
        CHECK(r[0] == doctest::Approx(100.0 / 3.0));
        CHECK(r[1] == doctest::Approx(200.0 / 3.0));
    }
    SUBCASE("zero blocks get the sqrt(r) floor") {
        const auto r = allocate_rates(std::vector<double>{0.0, 0.0}, 100.0, 2.0);
        CHECK(r[0] == doctest::Approx(10.0));
        CHECK(r[1] == doctest::Approx(10.0));
    }
    SUBCASE("sum stays below r + n sqrt(r) and respects the floor") {
        const std::vector<double> dt = {0.1, 0.0, 2.0, 0.4};
        const auto r = allocate_rates(dt, 64.0, 3.0);
        double total = 0.0;
        for (double v : r) {
            CHECK(v >= 8.0 - 1e-12);
            total += v;
        }
        CHECK(total <= 64.0 + 4.0 * 8.0 + 1e-9);
    }
    SUBCASE("argument errors") {
        CHECK_THROWS_AS(allocate_rates(std::vector<double>{1.0}, 0.0, 2.0), std::invalid_argument);
        CHECK_THROWS_AS(allocate_rates(std::vector<double>{-1.0}, 4.0, 2.0), std::invalid_argument);
    }
}

TEST_CASE("generalized entropy") {
    SUBCASE("deterministic variable has zero entropy") {
        CHECK(generalized_entropy(std::vector<double>{1.0}, 2.0) == doctest::Approx(0.0));
    }
    SUBCASE("uniform cases") {
        std::vector<double> u(16, 1.0 / 16.0);
        CHECK(generalized_entropy(u, 1.0) == doctest::Approx(std::log(16.0)).epsilon(1e-12));
        CHECK(generalized_entropy(u, 2.5) ==
              doctest::Approx(std::pow(std::log(16.0), 2.5)).epsilon(1e-12));
    }
    SUBCASE("concavity bound H^p <= (log k)^p + c1 log k with c1 = p (p-2)^(p-2)") {
        PathRng rng(113, 0);
        const double p = 3.0;
        const double c1 = p * std::pow(p - 2.0, p - 2.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> w(12);
            double total = 0.0;
            for (double& v : w) {
                v = -std::log(std::max(rng.uniform(), 1e-12));
                total += v;
            }
            for (double& v : w) v /= total;
            const double h = generalized_entropy(w, p);
            const double k = static_cast<double>(w.size());
            CHECK(h <= std::pow(std::log(k), p) + c1 * std::log(k) + 1e-9);
        }
    }
    SUBCASE("negative weights are rejected") {
        CHECK_THROWS_AS(generalized_entropy(std::vector<double>{1.5, -0.5}, 2.0),
                        std::invalid_argument);
    }
}

TEST_CASE("drift quantizer") {
    const double dt = 1.0 / 128.0;

    SUBCASE("zero drift selects the zero codeword at zero error") {
        std::vector<SampledPath> a_paths(16, make_path(1, dt, 1.0));
        const Codebook cb = drift_quantizer(a_paths, 3.0, 1.0);
        CHECK(cb.contains_zero);
        const NearestResult r = nearest(cb, a_paths[0], Norm::sup());
        CHECK(r.dist == doctest::Approx(0.0));
    }

    SUBCASE("linear family error decays like 1/rate") {
        // a(t) = c t with c spread over [-1, 1]
        std::vector<SampledPath> a_paths;
        PathRng rng(127, 0);
        for (int i = 0; i < 64; ++i) {
            SampledPath a = make_path(1, dt, 1.0);
            const double c = 2.0 * rng.uniform() - 1.0;
            for (std::size_t j = 0; j < a.len(); ++j) a.values[j] = c * a.t(j);
            a_paths.push_back(std::move(a));
        }
        DriftQuantizerOptions opts;
        opts.prune_to_training = false;  // the worst-case net drives the trend
        std::vector<double> log_r, log_e;
        for (double rate : {2.0, 3.0, 4.0, 5.0, 6.0}) {
            const Codebook cb = drift_quantizer(a_paths, rate, 1.0, opts);
            double acc = 0.0;
            for (const SampledPath& a : a_paths)
                acc += nearest(cb, a, Norm::sup()).dist / static_cast<double>(a_paths.size());
            if (acc <= 0.0) continue;
            log_r.push_back(std::log(rate));
            log_e.push_back(std::log(acc));
        }
        REQUIRE(log_r.size() >= 4);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < log_r.size(); ++i) {
            sx += log_r[i];
            sy += log_e[i];
            sxx += log_r[i] * log_r[i];
            sxy += log_r[i] * log_e[i];
        }
        const double n = static_cast<double>(log_r.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        CHECK(slope == doctest::Approx(-1.0).epsilon(0.2));
    }

    SUBCASE("non-finite paths are rejected") {
        std::vector<SampledPath> a_paths(2, make_path(1, dt, 1.0));
        a_paths[1].values[3] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(drift_quantizer(a_paths, 2.0, 1.0), std::invalid_argument);
    }
}

TEST_CASE("budget construction and validation") {
    const BudgetPolicy policy;
    EncodingBudget b = EncodingBudget::for_sup(std::log(4096.0), 1.0, policy);
    CHECK(b.r_wiener == doctest::Approx(std::log(4096.0)));
    CHECK(b.r_phi == doctest::Approx(std::pow(std::log(4096.0), 0.9)));
    CHECK_NOTHROW(b.validate());

    b.r_drift = 100.0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);

    EncodingBudget lp = EncodingBudget::for_lp(27.0, 1.0, 1, policy);
    CHECK(lp.n_blocks == 3);
    CHECK(lp.delta_r == doctest::Approx(std::sqrt(27.0)));
}

TEST_CASE("encode_sup on the wiener preset tracks direct coding") {
    const auto bundles = simulate_ensemble(wiener_spec(), std::vector<double>{0.0}, 1.0 / 256.0,
                                           3.0, 300, 131);
    const double rate = std::log(256.0);
    const EncodingBudget budget = EncodingBudget::for_sup(rate, 1.0, {});
    CodebookSetOptions opts;
    opts.samples_per_coord = 20000;
    opts.wiener_norm = Norm::sup();
    opts.seed = 131;
    const CodebookSet cbs = build_codebook_set(bundles, budget, opts);

    double pipeline = 0.0, direct = 0.0;
    const Codebook& unit = cbs.ladder_at(budget.r_wiener);
    for (const PathBundle& b : bundles) {
        const Reconstruction rec = encode_sup(b, budget, cbs);
        pipeline += rec.total_error * rec.total_error / bundles.size();
        const SampledPath x1 = slice_to(b.x, 1.0);
        const double d = nearest(unit, resample(x1, unit.entries[0].dt, 1.0), Norm::sup()).dist;
        direct += d * d / bundles.size();

        // triangle decomposition: total <= drift + cross + wiener stage
        CHECK(rec.total_error <=
              rec.stages.drift + rec.stages.cross + rec.stages.wiener + 0.05);
        // rate accounting
        CHECK(rec.rate_used <= budget.r * (1.0 + budget.slack) + 1e-9);
        CHECK(rec.rate_used == doctest::Approx(cbs.phi_cb.log_size() + cbs.drift_cb.log_size() +
                                               unit.log_size()));
    }
    // the wiener preset reduces to direct Wiener coding up to the small
    // time-change and drift overheads
    CHECK(std::sqrt(pipeline) == doctest::Approx(std::sqrt(direct)).epsilon(0.30));
}

TEST_CASE("encode_sup determinism") {
    const auto bundles = simulate_ensemble(ou_sin_spec(), std::vector<double>{0.0}, 1.0 / 256.0,
                                           4.0, 50, 137);
    const EncodingBudget budget = EncodingBudget::for_sup(std::log(128.0), 1.0, {});
    CodebookSetOptions opts;
    opts.samples_per_coord = 10000;
    opts.wiener_norm = Norm::sup();
    opts.seed = 137;
    const CodebookSet cbs = build_codebook_set(bundles, budget, opts);
    for (const PathBundle& b : bundles) {
        const Reconstruction r1 = encode_sup(b, budget, cbs);
        const Reconstruction r2 = encode_sup(b, budget, cbs);
        CHECK(r1.indices == r2.indices);
        CHECK(r1.total_error == r2.total_error);
    }
}

TEST_CASE("lp error is dominated by the sup error per sample") {
    const auto bundles = simulate_ensemble(ou_sin_spec(), std::vector<double>{0.0}, 1.0 / 256.0,
                                           4.0, 40, 139);
    const EncodingBudget budget = EncodingBudget::for_sup(std::log(128.0), 1.0, {});
    CodebookSetOptions opts;
    opts.samples_per_coord = 10000;
    opts.wiener_norm = Norm::sup();
    opts.seed = 139;
    const CodebookSet cbs = build_codebook_set(bundles, budget, opts);
    for (const PathBundle& b : bundles) {
        const Reconstruction rec = encode_sup(b, budget, cbs);
        const SampledPath x1 = slice_to(b.x, 1.0);
        // for the same reconstruction, the L^p grid norm of the error is
        // bounded by its sup norm on [0,1]
        const double lp_err = lq_dist(x1, rec.x_hat, 2.0);
        CHECK(lp_err <= rec.total_error + 1e-12);
    }
}

TEST_CASE("encode_lp with a single block matches unit-interval coding") {
    const auto bundles = simulate_ensemble(wiener_spec(), std::vector<double>{0.0}, 1.0 / 256.0,
                                           3.0, 200, 149);
    const double rate = std::log(256.0);
    EncodingBudget budget = EncodingBudget::for_lp(rate, 1.0, 1, {});
    budget.n_blocks = 1;
    CodebookSetOptions opts;
    opts.samples_per_coord = 20000;
    opts.wiener_norm = Norm::lq(2.0);
    opts.lp_extras = true;
    opts.seed = 149;
    const CodebookSet cbs = build_codebook_set(bundles, budget, opts);

    double pipeline = 0.0, direct = 0.0;
    const Codebook& unit = cbs.ladder_at(budget.r_wiener);
    for (const PathBundle& b : bundles) {
        const Reconstruction rec = encode_lp(b, budget, 2.0, cbs);
        pipeline += rec.total_error * rec.total_error / bundles.size();
        const SampledPath x1 = slice_to(b.x, 1.0);
        const double d = nearest_l2_fast(unit, resample(x1, unit.entries[0].dt, 1.0)).dist;
        direct += d * d / bundles.size();
        CHECK(rec.block_rates.size() == 1);
    }
    CHECK(std::sqrt(pipeline) == doctest::Approx(std::sqrt(direct)).epsilon(0.30));
}

TEST_CASE("Z_n computed two ways agrees within MC error") {
    const auto bundles = simulate_ensemble(ou_sin_spec(), std::vector<double>{0.0}, 1.0 / 512.0,
                                           1.0, 2000, 151);
    const int n = 4;
    const double p = 2.0;
    const double expo = p / (p + 2.0);

    // route 1: block increments of phi
    std::vector<double> z1_terms(bundles.size());
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        const TimeChange& phi = bundles[b].phi;
        double acc = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double d = phi.interp(static_cast<double>(i) / n) -
                             phi.interp(static_cast<double>(i - 1) / n);
            acc += std::pow(std::max(d, 0.0), expo);
        }
        z1_terms[b] = std::pow(acc, (p + 2.0) / 2.0) / n;
    }
    double z1 = 0.0;
    for (double v : z1_terms) z1 += v / bundles.size();
    z1 = std::pow(z1, 1.0 / p);

    // route 2: the block-averaged sigma^2 formula
    std::vector<double> z2_terms(bundles.size());
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        const TimeChange& phi = bundles[b].phi;
        double acc = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double bar_sigma_sq =
                std::max(0.0, (phi.interp(static_cast<double>(i) / n) -
                               phi.interp(static_cast<double>(i - 1) / n))) *
                n;
            acc += std::pow(bar_sigma_sq, expo) / n;  // integral over the block
        }
        z2_terms[b] = std::pow(acc, (p + 2.0) / 2.0);
    }
    double z2 = 0.0;
    for (double v : z2_terms) z2 += v / bundles.size();
    z2 = std::pow(z2, 1.0 / p);

    CHECK(z1 == doctest::Approx(z2).epsilon(1e-9));

    // and both approach E[||sigma||_{L^{2p/(p+2)}}^p]^{1/p} from the ensemble
    double direct = 0.0;
    for (const PathBundle& b : bundles) {
        const TimeChange& phi = b.phi;
        double acc = 0.0;
        const std::size_t n1 = grid_len(phi.dt, 1.0);
        for (std::size_t i = 0; i + 1 < n1; ++i) {
            const double sig2 = std::max(0.0, (phi.values[i + 1] - phi.values[i]) / phi.dt);
            acc += phi.dt * std::pow(sig2, expo);  // |sigma|^{2p/(p+2)}
        }
        direct += std::pow(acc, (p + 2.0) / 2.0) / bundles.size();
    }
    direct = std::pow(direct, 1.0 / p);
    CHECK(z1 == doctest::Approx(direct).epsilon(0.05));
}

TEST_CASE("adapt_codebook_to_measure") {
    ProductCodebookOptions pc;
    pc.samples_per_coord = 5000;
    pc.dt = 1.0 / 128.0;
    Codebook base = product_codebook(std::log(16.0), 4, {}, 157, pc);
    base = rescale_lq(base, 1.0, 2.0);
    const std::size_t n = base.entries.front().len();

    // probes
    std::vector<SampledPath> probes;
    for (int i = 0; i < 4; ++i) {
        PathRng rng(163, static_cast<std::uint64_t>(i));
        SampledPath w = make_path(1, base.entries[0].dt, 1.0);
        for (std::size_t j = 1; j < w.len(); ++j)
            w.values[j] = w.values[j - 1] + std::sqrt(w.dt) * rng.normal();
        probes.push_back(std::move(w));
    }
    // offset samples (-W_t, W_1 - W_t)
    std::vector<double> offsets;
    PathRng rng(167, 9);
    for (int i = 0; i < 4000; ++i) {
        const double t = rng.uniform();
        offsets.push_back(-std::sqrt(t) * rng.normal());
        offsets.push_back(std::sqrt(1.0 - t) * rng.normal());
    }

    SUBCASE("uniform measure keeps the base distortion up to offsets") {
        std::vector<double> nu = trapezoid_weights(n, base.entries[0].dt);
        const Codebook adapted = adapt_codebook_to_measure(base, nu, std::log(4.0), offsets, probes);
        CHECK(adapted.size() <= base.size() * 4);
        // distortion of a fresh path should not degrade materially
        PathRng prng(173, 3);
        SampledPath w = make_path(1, base.entries[0].dt, 1.0);
        for (std::size_t j = 1; j < w.len(); ++j)
            w.values[j] = w.values[j - 1] + std::sqrt(w.dt) * prng.normal();
        const double before = nearest(base, w, Norm::lq(2.0)).dist;
        const double after = nearest(adapted, w, Norm::lq(2.0)).dist;
        CHECK(after <= before * 1.5 + 0.05);
    }

    SUBCASE("half-supported measure obeys the mass-factor bound") {
        std::vector<double> nu(n, 0.0);
        for (std::size_t i = 0; i < n / 2; ++i) nu[i] = base.entries[0].dt;
        double mass = 0.0;
        for (double v : nu) mass += v;
        const Codebook adapted = adapt_codebook_to_measure(base, nu, std::log(4.0), offsets, probes);

        double avg = 0.0;
        const int trials = 64;
        for (int i = 0; i < trials; ++i) {
            PathRng prng(179, static_cast<std::uint64_t>(i));
            SampledPath w = make_path(1, base.entries[0].dt, 1.0);
            for (std::size_t j = 1; j < w.len(); ++j)
                w.values[j] = w.values[j - 1] + std::sqrt(w.dt) * prng.normal();
            double best = std::numeric_limits<double>::infinity();
            for (const SampledPath& e : adapted.entries)
                best = std::min(best, lq_dist_weighted(w, e, nu, 2.0));
            avg += best * best / trials;
        }
        // nu[0,T)^{1/q} sqrt(T) (base unit distortion + offset tail) bound,
        // checked with a generous constant
        double base_d = 0.0;
        for (int i = 0; i < trials; ++i) {
            PathRng prng(181, static_cast<std::uint64_t>(i));
            SampledPath w = make_path(1, base.entries[0].dt, 1.0);
            for (std::size_t j = 1; j < w.len(); ++j)
                w.values[j] = w.values[j - 1] + std::sqrt(w.dt) * prng.normal();
            const double d = nearest(base, w, Norm::lq(2.0)).dist;
            base_d += d * d / trials;
        }
        CHECK(std::sqrt(avg) <= std::sqrt(mass) * (std::sqrt(base_d) + 1.0) * 2.0);
    }

    SUBCASE("zero-mass measure returns the base codebook") {
        std::vector<double> nu(n, 0.0);
        const Codebook same = adapt_codebook_to_measure(base, nu, 1.0, offsets, probes);
        CHECK(same.size() == base.size());
    }

    SUBCASE("delta_r = 0 quantizes offsets to their mean") {
        std::vector<double> nu = trapezoid_weights(n, base.entries[0].dt);
        const Codebook adapted = adapt_codebook_to_measure(base, nu, 0.0, offsets, probes);
        CHECK(adapted.size() == base.size());
        // single offset codeword = sample mean: direct evaluation oracle
        double mean0 = 0.0, mean1 = 0.0;
        for (std::size_t i = 0; i < offsets.size(); i += 2) {
            mean0 += offsets[i] / (offsets.size() / 2);
            mean1 += offsets[i + 1] / (offsets.size() / 2);
        }
        bool found = false;
        for (std::size_t i = 0; i < adapted.entries[0].len(); ++i) {
            const double diff = adapted.entries[0].values[i] - base.entries[0].values[i];
            if (std::abs(diff - mean0) < 1e-9 || std::abs(diff - mean1) < 1e-9) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("degenerate time change falls back to the drift reconstruction") {
    // sigma = 0 on [0,1] then the extension takes over: phi(1) = 0
    DiffusionSpec s = wiener_spec();
    s.sigma = [](std::span<const double>, double) { return 0.0; };
    const auto bundles = simulate_ensemble(s, std::vector<double>{0.0}, 1.0 / 128.0, 2.0, 4, 191);
    CHECK(bundles[0].phi.interp(1.0) == doctest::Approx(0.0));

    const EncodingBudget budget = EncodingBudget::for_sup(std::log(64.0), 1.0, {});
    CodebookSetOptions opts;
    opts.samples_per_coord = 5000;
    opts.wiener_norm = Norm::sup();
    opts.seed = 191;
    const CodebookSet cbs = build_codebook_set(bundles, budget, opts);
    const Reconstruction rec = encode_sup(bundles[0], budget, cbs);
    CHECK(rec.stages.wiener == 0.0);
    CHECK(rec.total_error == doctest::Approx(0.0).epsilon(1e-9));  // X == 0 == A_hat
}
