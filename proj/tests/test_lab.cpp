#include "doctest.h"
#include "dq/lab.hpp"
#include "dq/rng.hpp"

#include <cmath>

using namespace dq;

namespace {

DiffusionSpec const_sigma(double c) {
    DiffusionSpec s;
    s.d = 1;
    s.L = c + 1.0;
    s.beta = 1.0;
    s.b = [](std::span<const double>, double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    s.sigma = [c](std::span<const double>, double) { return c; };
    return s;
}

DiffusionSpec ramp_sigma() {
    DiffusionSpec s = const_sigma(1.0);
    s.sigma = [](std::span<const double>, double t) { return t; };
    return s;
}

}  // namespace

TEST_CASE("empirical distortion") {
    SUBCASE("all-zero errors") {
        const auto [d, se] = empirical_distortion(std::vector<double>{0.0, 0.0, 0.0}, 2.0);
        CHECK(d == 0.0);
        CHECK(se == 0.0);
    }
    SUBCASE("single path has undefined stderr") {
        const auto [d, se] = empirical_distortion(std::vector<double>{1.5}, 2.0);
        CHECK(d == doctest::Approx(1.5));
        CHECK(std::isnan(se));
    }
    SUBCASE("hand-computed case {1,2,3} at p=2") {
        const std::vector<double> errs = {1.0, 2.0, 3.0};
        const auto [d, se] = empirical_distortion(errs, 2.0);
        CHECK(d == doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-12));
        // delta method: se(mean of e^2) / (2 sqrt(mean))
        const double mean = 14.0 / 3.0;
        double var = 0.0;
        for (double e : errs) var += (e * e - mean) * (e * e - mean);
        var /= 2.0;
        const double se_mean = std::sqrt(var / 3.0);
        CHECK(se == doctest::Approx(se_mean / (2.0 * std::sqrt(mean))).epsilon(1e-12));
    }
    SUBCASE("scale equivariance is exact") {
        const std::vector<double> errs = {0.25, 1.0, 2.5};
        std::vector<double> scaled = errs;
        for (double& e : scaled) e *= 7.0;
        CHECK(empirical_distortion(scaled, 3.0).first ==
              doctest::Approx(7.0 * empirical_distortion(errs, 3.0).first).epsilon(1e-12));
    }
    SUBCASE("p < 1 is rejected") {
        CHECK_THROWS_AS(empirical_distortion(std::vector<double>{1.0}, 0.5),
                        std::invalid_argument);
    }
}

TEST_CASE("sigma norm moments") {
    SUBCASE("constant sigma is exact for any (p, rho)") {
        const auto bundles =
            simulate_ensemble(const_sigma(3.0), std::vector<double>{0.0}, 1.0 / 128.0, 1.0, 8, 7);
        for (double p : {1.0, 2.0, 4.0})
            for (double rho : {0.5, 1.0, 2.0})
                CHECK(sigma_norm_moment(bundles, p, rho) == doctest::Approx(3.0).epsilon(1e-10));
    }
    SUBCASE("deterministic ramp sigma_t = t gives 1/sqrt(3) in L2") {
        const auto bundles =
            simulate_ensemble(ramp_sigma(), std::vector<double>{0.0}, 1.0 / 2048.0, 1.0, 4, 7);
        for (double p : {1.0, 2.0, 3.0})
            CHECK(sigma_norm_moment(bundles, p, 2.0) ==
                  doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(2e-3));
    }
    SUBCASE("two-seed stability for a state-dependent sigma") {
        DiffusionSpec s = const_sigma(1.0);
        s.b = [](std::span<const double> x, double, std::span<double> out) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
        };
        s.sigma = [](std::span<const double> x, double) { return 1.0 + 0.5 * std::sin(x[0]); };
        const auto b1 = simulate_ensemble(s, std::vector<double>{0.0}, 1.0 / 256.0, 1.0, 4000, 11);
        const auto b2 = simulate_ensemble(s, std::vector<double>{0.0}, 1.0 / 256.0, 1.0, 4000, 13);
        const double m1 = sigma_norm_moment(b1, 2.0, 2.0);
        const double m2 = sigma_norm_moment(b2, 2.0, 2.0);
        CHECK(std::abs(m1 - m2) < 0.02);  // ~3 stderr at this ensemble size
    }
}

TEST_CASE("fit_sqrt_constant") {
    auto synth = [](double c, double noise, std::uint64_t seed) {
        std::vector<DistortionReport> curve;
        PathRng rng(seed, 0);
        for (int k = 4; k <= 12; ++k) {
            DistortionReport r;
            r.rate = std::log(std::pow(2.0, k));
            r.distortion = c / std::sqrt(r.rate) * (1.0 + noise * (2.0 * rng.uniform() - 1.0));
            r.sqrt_r_times_d = std::sqrt(r.rate) * r.distortion;
            curve.push_back(r);
        }
        return curve;
    };

    SUBCASE("exact law recovers the constant") {
        const CurveFit fit = fit_sqrt_constant(synth(3.0, 0.0, 1), 0.5);
        CHECK(fit.fitted_constant == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(fit.fit_residual < 1e-12);
    }
    SUBCASE("1% noise keeps the constant within 3%") {
        const CurveFit fit = fit_sqrt_constant(synth(3.0, 0.01, 2), 0.6);
        CHECK(std::abs(fit.fitted_constant - 3.0) / 3.0 < 0.03);
    }
    SUBCASE("free-slope diagnostic sees a 1/r law") {
        std::vector<DistortionReport> curve;
        for (int k = 4; k <= 12; ++k) {
            DistortionReport r;
            r.rate = std::log(std::pow(2.0, k));
            r.distortion = 2.0 / r.rate;
            curve.push_back(r);
        }
        const CurveFit fit = fit_sqrt_constant(curve, 1.0);
        CHECK(fit.free_slope == doctest::Approx(-1.0).epsilon(1e-9));
    }
    SUBCASE("nonpositive distortions are a fit error") {
        std::vector<DistortionReport> curve = synth(1.0, 0.0, 3);
        curve[4].distortion = 0.0;
        CHECK_THROWS_AS(fit_sqrt_constant(curve, 1.0), std::invalid_argument);
    }
}

TEST_CASE("rate zero curve point equals the zero-codeword baseline") {
    CurveRequest req;
    req.spec = const_sigma(1.0);
    req.x0 = {0.0};
    req.dt = 1.0 / 256.0;
    req.T = 1.0;
    req.n_paths = 2000;
    req.seed = 17;
    req.scheme = Scheme::wiener_l2;
    req.p = 2.0;
    req.rates = {0.0, std::log(16.0)};
    req.samples_per_coord = 10000;

    const auto curve = rate_distortion_curve(req);
    // E||W||_{L2}^2 = 1/2
    CHECK(curve[0].distortion == doctest::Approx(std::sqrt(0.5)).epsilon(0.05));
    CHECK(curve[1].distortion < curve[0].distortion);
}

TEST_CASE("curves are monotone and the L2 wiener point lands near the constant") {
    CurveRequest req;
    req.spec = const_sigma(1.0);
    req.x0 = {0.0};
    req.dt = 1.0 / 512.0;
    req.T = 1.0;
    req.n_paths = 4000;
    req.seed = 19;
    req.scheme = Scheme::wiener_l2;
    req.p = 2.0;
    req.samples_per_coord = 50000;
    for (int k = 4; k <= 8; ++k) req.rates.push_back(std::log(std::pow(2.0, k)));

    const auto curve = rate_distortion_curve(req);
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].distortion <= curve[i - 1].distortion + 3.0 * curve[i].stderr_);
    // desk-scale values sit above the asymptote but within the bracket
    CHECK(curve.back().sqrt_r_times_d > 0.40);
    CHECK(curve.back().sqrt_r_times_d < 0.57);
}

TEST_CASE("holder moment check basics") {
    SUBCASE("silent sigma gives ratio zero") {
        DiffusionSpec s = const_sigma(0.0);
        const auto bundles = simulate_ensemble(s, std::vector<double>{0.0}, 1.0 / 128.0, 1.0, 8, 23);
        const HolderMomentReport rep = holder_moment_check(bundles, 0.2, 5.0);
        CHECK(rep.ratio == 0.0);
    }
    SUBCASE("admissibility flag follows kappa > 2/(1-2 alpha)") {
        const auto bundles =
            simulate_ensemble(const_sigma(1.0), std::vector<double>{0.0}, 1.0 / 128.0, 1.0, 8, 29);
        CHECK(holder_moment_check(bundles, 0.2, 5.0).admissible);
        CHECK_FALSE(holder_moment_check(bundles, 0.2, 3.0).admissible);
        CHECK_THROWS_AS(holder_moment_check(bundles, 0.6, 5.0), std::invalid_argument);
    }
}
