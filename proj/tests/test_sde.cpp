#include "doctest.h"
#include "dq/rng.hpp"
#include "dq/sde.hpp"

#include <cmath>
#include <numeric>

using namespace dq;

namespace {

DiffusionSpec make_spec(double (*sig)(std::span<const double>, double),
                        void (*drift)(std::span<const double>, double, std::span<double>),
                        double L = 3.0, double beta = 1.0) {
    DiffusionSpec s;
    s.d = 1;
    s.L = L;
    s.beta = beta;
    s.sigma = sig;
    s.b = drift;
    return s;
}

void zero_drift(std::span<const double>, double, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
}
void ou_drift(std::span<const double> x, double, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
}
double unit_sigma(std::span<const double>, double) { return 1.0; }
double two_sigma(std::span<const double>, double) { return 2.0; }

}  // namespace

TEST_CASE("substreams are pure functions of (seed, index)") {
    PathRng a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        const double va = a.normal();
        CHECK(va == b.normal());
        (void)c.normal();
    }
    PathRng d(42, 8);
    PathRng e(43, 7);
    CHECK(d.normal() != e.normal());
}

TEST_CASE("worker count does not change the ensemble") {
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const std::vector<double> x0{0.0};
    const auto one = simulate_ensemble(spec, x0, 1.0 / 64.0, 1.0, 32, 5, {1.0, 1});
    const auto four = simulate_ensemble(spec, x0, 1.0 / 64.0, 1.0, 32, 5, {1.0, 4});
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].x.values == four[i].x.values);
        CHECK(one[i].phi.values == four[i].phi.values);
    }
}

TEST_CASE("identity coefficients give x = driver and phi = t") {
    const DiffusionSpec spec = make_spec(unit_sigma, zero_drift);
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 128.0, 1.0, 4, 9);
    for (const PathBundle& b : bundles) {
        CHECK(sup_dist(b.x, b.w_driver) == 0.0);
        CHECK(sup_norm(b.a) == 0.0);
        for (std::size_t i = 0; i < b.phi.len(); ++i)
            CHECK(b.phi.values[i] == doctest::Approx(b.phi.t(i)).epsilon(1e-12));
    }
}

TEST_CASE("constant sigma=2 scales the driver and quadruples phi") {
    const DiffusionSpec spec = make_spec(two_sigma, zero_drift);
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 128.0, 2.0, 3, 11);
    const std::size_t n1 = grid_len(1.0 / 128.0, 1.0);
    for (const PathBundle& b : bundles) {
        CHECK(b.phi.values[n1 - 1] == doctest::Approx(4.0).epsilon(1e-12));
        for (std::size_t i = 0; i < n1; ++i)
            CHECK(b.x.values[i] == doctest::Approx(2.0 * b.w_driver.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("OU variance at t=1 matches the closed form") {
    // independent oracle: Var X_1 = (1 - e^{-2})/2 for dX = -X dt + dW
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const int n = 40000;
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 1024.0, 1.0, n, 17);
    const std::size_t last = bundles.front().x.len() - 1;
    double mean = 0.0, m2 = 0.0;
    for (const PathBundle& b : bundles) mean += b.x.values[last];
    mean /= n;
    for (const PathBundle& b : bundles) {
        const double d = b.x.values[last] - mean;
        m2 += d * d;
    }
    const double var = m2 / (n - 1);
    const double target = (1.0 - std::exp(-2.0)) / 2.0;
    const double se = target * std::sqrt(2.0 / n);
    CHECK(std::abs(var - target) < 3.0 * se);
}

TEST_CASE("x = m + a pointwise to machine precision") {
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.5}, 1.0 / 256.0, 2.0, 8, 23);
    for (const PathBundle& b : bundles)
        for (std::size_t i = 0; i < b.x.len(); ++i)
            CHECK(b.x.values[i] == doctest::Approx(b.m.values[i] + b.a.values[i]).epsilon(1e-14));
}

TEST_CASE("phi is nondecreasing from zero") {
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 256.0, 2.0, 8, 29);
    for (const PathBundle& b : bundles) {
        CHECK(b.phi.values.front() == 0.0);
        for (std::size_t i = 1; i < b.phi.len(); ++i)
            CHECK(b.phi.values[i] >= b.phi.values[i - 1]);
    }
}

TEST_CASE("refinement differences behave like strong order 1/2") {
    // the same driver at dt, dt/2, dt/4 via pair-summed increments
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const std::vector<double> x0{0.0};
    const double dt_fine = 1.0 / 256.0;
    const std::size_t steps_fine = grid_len(dt_fine, 1.0) - 1;
    const int n = 10000;

    std::vector<double> sup_sq(3, 0.0);  // E||X||^2 at dt, dt/2, dt/4 with dt = 4*dt_fine
    for (int path = 0; path < n; ++path) {
        PathRng rng(31, static_cast<std::uint64_t>(path));
        std::vector<double> fine(steps_fine);
        const double sq = std::sqrt(dt_fine);
        for (double& v : fine) v = sq * rng.normal();

        for (int level = 0; level < 3; ++level) {
            const std::size_t stride = std::size_t{1} << (2 - level);  // 4, 2, 1
            std::vector<double> inc(steps_fine / stride, 0.0);
            for (std::size_t i = 0; i < steps_fine; ++i) inc[i / stride] += fine[i];
            const PathBundle b = simulate_path_with_increments(
                spec, x0, dt_fine * static_cast<double>(stride), 1.0, inc);
            const double s = sup_norm(b.x);
            sup_sq[static_cast<std::size_t>(level)] += s * s / n;
        }
    }
    const double diff_coarse = std::abs(sup_sq[0] - sup_sq[1]);
    const double diff_fine = std::abs(sup_sq[1] - sup_sq[2]);
    const double ratio = diff_coarse / diff_fine;
    CHECK(ratio >= 1.2);
    CHECK(ratio <= 2.8);
}

TEST_CASE("assumption (C) checker flags growth violations") {
    ProbeBox box;
    box.lo = {-10.0};
    box.hi = {10.0};
    box.t_hi = 1.0;

    DiffusionSpec lin = make_spec(nullptr, zero_drift, 1.0, 1.0);
    lin.sigma = [](std::span<const double> x, double) { return x[0]; };
    CHECK_FALSE(check_assumption_C(lin, 4000, box, 3).violated);

    DiffusionSpec quad = make_spec(nullptr, zero_drift, 1.0, 1.0);
    quad.sigma = [](std::span<const double> x, double) { return x[0] * x[0]; };
    CHECK(check_assumption_C(quad, 4000, box, 3).violated);

    // |x|^(1/2) with beta = 1/2, L = 2 on [-1, 1]: both ratios stay <= 1
    DiffusionSpec root = make_spec(nullptr, zero_drift, 2.0, 0.5);
    root.sigma = [](std::span<const double> x, double) { return std::sqrt(std::abs(x[0])); };
    ProbeBox unit_box;
    unit_box.lo = {-1.0};
    unit_box.hi = {1.0};
    CHECK_FALSE(check_assumption_C(root, 4000, unit_box, 3).violated);
}

TEST_CASE("time change inverse") {
    TimeChange phi;
    static_cast<SampledPath&>(phi) = make_path(1, 0.25, 1.0);
    SUBCASE("identity") {
        for (std::size_t i = 0; i < phi.len(); ++i) phi.values[i] = phi.t(i);
        CHECK(time_change_inverse(phi, 0.5) == doctest::Approx(0.5));
    }
    SUBCASE("constant rate 4") {
        for (std::size_t i = 0; i < phi.len(); ++i) phi.values[i] = 4.0 * phi.t(i);
        CHECK(time_change_inverse(phi, 1.0) == doctest::Approx(0.25));
    }
    SUBCASE("flat piece jumps, against a linear scan oracle") {
        phi.values = {0.0, 0.5, 0.5, 0.5, 1.0};
        for (double t : {0.0, 0.2, 0.5, 0.7, 1.0}) {
            const double inv = time_change_inverse(phi, t);
            // oracle: first grid cell where phi crosses t, linear inside
            double oracle = phi.T;
            for (std::size_t i = 0; i < phi.len(); ++i) {
                if (phi.values[i] >= t) {
                    if (i == 0) {
                        oracle = 0.0;
                    } else if (phi.values[i] > phi.values[i - 1]) {
                        oracle = phi.t(i - 1) +
                                 (t - phi.values[i - 1]) / (phi.values[i] - phi.values[i - 1]) *
                                     phi.dt;
                    } else {
                        oracle = phi.t(i);
                    }
                    break;
                }
            }
            CHECK(inv == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
    SUBCASE("out of range") {
        for (std::size_t i = 0; i < phi.len(); ++i) phi.values[i] = phi.t(i);
        CHECK_THROWS_AS(time_change_inverse(phi, 2.0), std::out_of_range);
    }
}

TEST_CASE("inverse after phi dominates identity up to one grid step") {
    const DiffusionSpec spec = make_spec(unit_sigma, ou_drift);
    const auto bundles = simulate_ensemble(spec, std::vector<double>{0.2}, 1.0 / 128.0, 2.0, 4, 37);
    for (const PathBundle& b : bundles) {
        for (std::size_t i = 0; i + 1 < b.phi.len(); i += 7) {
            if (b.phi.values[i + 1] <= b.phi.values[i]) continue;  // flat cell
            const double back = time_change_inverse(b.phi, b.phi.values[i]);
            CHECK(back >= b.phi.t(i) - b.phi.dt - 1e-12);
        }
    }
}

TEST_CASE("holder seminorm closed forms") {
    SUBCASE("constants vanish") {
        SampledPath f = make_path(1, 0.1, 1.0);
        for (double& v : f.values) v = 3.5;
        CHECK(holder_seminorm(f, 0.5) == doctest::Approx(0.0));
    }
    SUBCASE("linear function, alpha = 1") {
        SampledPath f = make_path(1, 1.0 / 128.0, 1.0);
        for (std::size_t i = 0; i < f.len(); ++i) f.values[i] = f.t(i);
        CHECK(holder_seminorm(f, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("sqrt(t), alpha = 1/2, attained at s=0") {
        SampledPath f = make_path(1, 1.0 / 512.0, 1.0);
        for (std::size_t i = 0; i < f.len(); ++i) f.values[i] = std::sqrt(f.t(i));
        CHECK(holder_seminorm(f, 0.5) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("needs two nodes") {
        SampledPath f;
        f.d = 1;
        f.dt = 1.0;
        f.T = 1.0;
        f.values = {0.0};
        CHECK_THROWS_AS(holder_seminorm(f, 0.5), std::invalid_argument);
    }
}

TEST_CASE("simulation argument errors") {
    const DiffusionSpec spec = make_spec(unit_sigma, zero_drift);
    const std::vector<double> x0{0.0};
    CHECK_THROWS_AS(simulate_ensemble(spec, x0, 2.0, 1.0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(simulate_ensemble(spec, x0, 0.1, 0.5, 1, 1), std::invalid_argument);

    DiffusionSpec bad = spec;
    bad.sigma = [](std::span<const double>, double t) {
        return t > 0.1 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    };
    CHECK_THROWS_AS(simulate_ensemble(bad, x0, 0.05, 1.0, 1, 1), SimulationError);
}

TEST_CASE("discrete H-norm of t is 1") {
    SampledPath f = make_path(1, 1.0 / 64.0, 1.0);
    for (std::size_t i = 0; i < f.len(); ++i) f.values[i] = f.t(i);
    CHECK(discrete_h_norm(f) == doctest::Approx(1.0).epsilon(1e-12));
}
