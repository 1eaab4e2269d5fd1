#include "doctest.h"
#include "dq/holder.hpp"
#include "dq/rng.hpp"
#include "dq/sde.hpp"

#include <cmath>

using namespace dq;

namespace {

TimeChange linear_time_change(double slope, double dt = 1.0 / 128.0) {
    TimeChange tc;
    static_cast<SampledPath&>(tc) = make_path(1, dt, 1.0);
    for (std::size_t i = 0; i < tc.len(); ++i) tc.values[i] = slope * tc.t(i);
    tc.monotone = true;
    return tc;
}

std::vector<TimeChange> ou_time_changes(int n, std::uint64_t seed) {
    DiffusionSpec spec;
    spec.d = 1;
    spec.L = 3.0;
    spec.beta = 1.0;
    spec.b = [](std::span<const double> x, double, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
    };
    spec.sigma = [](std::span<const double> x, double) { return 1.0 + 0.5 * std::sin(x[0]); };
    const auto bundles =
        simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 256.0, 1.0, n, seed);
    std::vector<TimeChange> out(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) out[i] = bundles[i].phi;
    return out;
}

}  // namespace

TEST_CASE("layered codebook on the zero training set") {
    const std::vector<TimeChange> training = {linear_time_change(0.0)};
    for (double eps : {0.5, 0.1, 0.02}) {
        const LayeredCodebook lc = build_layered_codebook(training, 1.4, eps);
        const QuantizedTimeChange q = quantize_time_change(training[0], lc.cb);
        CHECK(q.dist == doctest::Approx(0.0));
    }
}

TEST_CASE("shell containment: f(t)=t is represented within the base resolution") {
    const TimeChange f = linear_time_change(1.0);
    const std::vector<TimeChange> training = {f};
    const double eps = 0.25;
    const LayeredCodebook lc = build_layered_codebook(training, 1.4, eps);
    // ||f||_s = 1 sits in the first shell, so its net error is <= eps_0 = eps
    const NearestResult nr = nearest(lc.cb, f, Norm::sup());
    CHECK(nr.dist <= eps + 1e-12);
}

TEST_CASE("enumerated net size grows like eps^(-1/s)") {
    const std::vector<TimeChange> training = ou_time_changes(64, 71);
    const double s = 1.4;
    std::vector<double> eps_list = {0.8, 0.4, 0.2, 0.1, 0.08};
    std::vector<double> log_sizes;
    for (double eps : eps_list) {
        LayeredOptions opts;
        opts.hard_cap = std::size_t{1} << 20;
        const LayeredCodebook lc = build_layered_codebook(training, s, eps, opts);
        log_sizes.push_back(std::log(static_cast<double>(lc.cb.size())));
    }
    // compare measured growth against eps^(-1/s) over the decade, factor 3
    const double measured = log_sizes.back() / log_sizes.front();
    const double predicted =
        std::pow(eps_list.front() / eps_list.back(), 1.0 / s);
    CHECK(measured > predicted / 3.0);
    CHECK(measured < predicted * 3.0);
    for (std::size_t i = 1; i < log_sizes.size(); ++i) CHECK(log_sizes[i] >= log_sizes[i - 1]);
}

TEST_CASE("quantize_time_change basics") {
    const std::vector<TimeChange> training = ou_time_changes(128, 73);

    SUBCASE("an entry already in the codebook returns unchanged") {
        LayeredOptions opts;
        opts.prune_to_training = true;
        const LayeredCodebook lc = build_layered_codebook(training, 1.4, 0.05, opts);
        TimeChange entry;
        static_cast<SampledPath&>(entry) = lc.cb.entries.front();
        entry.monotone = true;
        const QuantizedTimeChange q = quantize_time_change(entry, lc.cb);
        CHECK(q.dist == doctest::Approx(0.0));
    }

    SUBCASE("zero codebook returns the zero reconstruction") {
        Codebook zero;
        zero.entries.push_back(make_path(1, training[0].dt, training[0].T));
        zero.contains_zero = true;
        const QuantizedTimeChange q = quantize_time_change(training[0], zero);
        CHECK(q.dist == doctest::Approx(sup_norm(training[0])));
        for (double v : q.phi_hat.values) CHECK(v == 0.0);
    }

    SUBCASE("rate sweep decays superlinearly") {
        std::vector<double> rates = {1.0, 2.0, 3.0, 4.0, 5.0};
        std::vector<double> log_err, log_rate;
        for (double rate : rates) {
            LayeredOptions opts;
            opts.prune_to_training = true;
            const LayeredCodebook lc = layered_codebook_for_rate(training, 1.4, rate, opts);
            double acc = 0.0;
            for (const TimeChange& phi : training) {
                const QuantizedTimeChange q = quantize_time_change(phi, lc.cb);
                acc += q.dist * q.dist / static_cast<double>(training.size());
            }
            if (acc <= 0.0) continue;
            log_err.push_back(0.5 * std::log(acc));
            log_rate.push_back(std::log(rate));
        }
        REQUIRE(log_err.size() >= 3);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < log_err.size(); ++i) {
            sx += log_rate[i];
            sy += log_err[i];
            sxx += log_rate[i] * log_rate[i];
            sxy += log_rate[i] * log_err[i];
        }
        const double n = static_cast<double>(log_err.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        CHECK(slope < -1.05);  // superlinear decay in the rate
    }
}

TEST_CASE("monotone regularization") {
    SUBCASE("nondecreasing input is unchanged") {
        const TimeChange f = linear_time_change(2.0);
        const TimeChange r = monotone_regularize(f);
        CHECK(sup_dist(f, r) == 0.0);
    }
    SUBCASE("(0, 1, 0.5) becomes (0, 1, 1)") {
        SampledPath f = make_path(1, 0.5, 1.0);
        f.values = {0.0, 1.0, 0.5};
        const TimeChange r = monotone_regularize(f);
        CHECK(r.values[0] == 0.0);
        CHECK(r.values[1] == 1.0);
        CHECK(r.values[2] == 1.0);
    }
    SUBCASE("random walk equals the prefix-max oracle") {
        PathRng rng(79, 0);
        SampledPath f = make_path(1, 1.0 / 256.0, 1.0);
        for (std::size_t i = 1; i < f.len(); ++i)
            f.values[i] = f.values[i - 1] + 0.1 * rng.normal();
        const TimeChange r = monotone_regularize(f);
        double run = f.values[0];
        for (std::size_t i = 0; i < f.len(); ++i) {
            run = std::max(run, f.values[i]);
            CHECK(r.values[i] == doctest::Approx(run));
        }
    }
    SUBCASE("idempotent and 1-Lipschitz in sup norm") {
        PathRng rng(83, 1);
        SampledPath f = make_path(1, 1.0 / 64.0, 1.0);
        SampledPath g = f;
        for (std::size_t i = 1; i < f.len(); ++i) {
            f.values[i] = f.values[i - 1] + 0.2 * rng.normal();
            g.values[i] = g.values[i - 1] + 0.2 * rng.normal();
        }
        const TimeChange rf = monotone_regularize(f);
        const TimeChange rrf = monotone_regularize(rf);
        CHECK(sup_dist(rf, rrf) == 0.0);
        const TimeChange rg = monotone_regularize(g);
        CHECK(sup_dist(rf, rg) <= sup_dist(f, g) + 1e-12);
    }
}

TEST_CASE("regular reconstruction holds on every sample") {
    const std::vector<TimeChange> training = ou_time_changes(400, 89);
    LayeredOptions opts;
    opts.prune_to_training = true;
    const LayeredCodebook lc = layered_codebook_for_rate(training, 1.4, 3.0, opts);
    for (const TimeChange& phi : training) {
        const QuantizedTimeChange q = quantize_time_change(phi, lc.cb);
        CHECK(q.dist <= sup_norm(phi) + 1e-12);
        CHECK(q.phi_hat.monotone);
    }
}

TEST_CASE("reconstructed endpoint moments are dominated") {
    // E[phi_hat(1)^p]^(1/p) <= 2 E[||phi||^p]^(1/p)
    const std::vector<TimeChange> training = ou_time_changes(400, 97);
    LayeredOptions opts;
    opts.prune_to_training = true;
    const LayeredCodebook lc = layered_codebook_for_rate(training, 1.4, 2.5, opts);
    const double p = 2.0;
    double hat_moment = 0.0, phi_moment = 0.0;
    for (const TimeChange& phi : training) {
        const QuantizedTimeChange q = quantize_time_change(phi, lc.cb);
        hat_moment += std::pow(q.phi_hat.values.back(), p) / training.size();
        phi_moment += std::pow(sup_norm(phi), p) / training.size();
    }
    CHECK(std::pow(hat_moment, 1.0 / p) <= 2.0 * std::pow(phi_moment, 1.0 / p) + 1e-12);
}

TEST_CASE("cross term") {
    // driver Wiener path on [0, 2]
    PathRng rng(101, 0);
    SampledPath w = make_path(1, 1.0 / 512.0, 2.0);
    for (std::size_t i = 1; i < w.len(); ++i)
        w.values[i] = w.values[i - 1] + std::sqrt(w.dt) * rng.normal();

    const TimeChange phi = linear_time_change(1.0, 1.0 / 256.0);

    SUBCASE("identical reconstructions give zero") {
        CHECK(cross_term(w, phi, phi) == doctest::Approx(0.0));
    }
    SUBCASE("a constant shift is bounded by the direct oscillation sup") {
        const double shift = 0.05;
        TimeChange shifted = phi;
        for (double& v : shifted.values) v += shift;
        const double cross = cross_term(w, phi, shifted);
        double direct = 0.0;
        for (std::size_t i = 0; i < phi.len(); ++i) {
            const double diff = std::abs(w.interp(phi.values[i]) - w.interp(phi.values[i] + shift));
            direct = std::max(direct, diff);
        }
        CHECK(cross == doctest::Approx(direct).epsilon(1e-12));
    }
    SUBCASE("horizon violations raise range errors") {
        TimeChange big = phi;
        for (double& v : big.values) v *= 10.0;
        CHECK_THROWS_AS(cross_term(w, phi, big), std::out_of_range);
    }
}

TEST_CASE("modulus tail estimate") {
    SUBCASE("huge eps2 makes both sides certain") {
        const ModulusReport rep = modulus_tail_estimate(1.0, 0.01, 5.0, 200, 103);
        CHECK(rep.empirical == doctest::Approx(1.0));
        CHECK(rep.bound > 0.999);
        CHECK(rep.satisfied);
    }
    SUBCASE("lemma case (1, 0.01, 0.2)") {
        const ModulusReport rep = modulus_tail_estimate(1.0, 0.01, 0.2, 2000, 107);
        CHECK(rep.n_intervals == 100);
        CHECK(rep.satisfied);
    }
    SUBCASE("hypothesis violation is an argument error") {
        CHECK_THROWS_AS(modulus_tail_estimate(1.0, 0.02, 0.1, 100, 1), std::invalid_argument);
    }
    SUBCASE("per-coordinate application of a 2-d driver") {
        // coordinates are independent scalar Wiener processes; the estimator
        // applies to each one separately
        for (std::uint64_t coord_seed : {201ULL, 202ULL}) {
            const ModulusReport rep = modulus_tail_estimate(1.0, 0.04, 0.3, 500, coord_seed);
            CHECK(rep.satisfied);
        }
    }
}

TEST_CASE("budget error names the cap") {
    const std::vector<TimeChange> training = ou_time_changes(32, 109);
    LayeredOptions opts;
    opts.hard_cap = 64;
    CHECK_THROWS_AS(build_layered_codebook(training, 1.4, 0.005, opts), BudgetError);
}
