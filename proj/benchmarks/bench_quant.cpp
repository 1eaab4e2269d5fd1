#include <benchmark/benchmark.h>

#include <cmath>

#include "dq/rng.hpp"
#include "dq/sde.hpp"
#include "dq/wiener.hpp"

namespace {

dq::SampledPath brownian(double dt, std::uint64_t index) {
    dq::PathRng rng(99, index);
    dq::SampledPath p = dq::make_path(1, dt, 1.0);
    const double sq = std::sqrt(dt);
    for (std::size_t i = 1; i < p.len(); ++i) p.values[i] = p.values[i - 1] + sq * rng.normal();
    return p;
}

void BM_SimulateOU(benchmark::State& state) {
    dq::DiffusionSpec spec;
    spec.d = 1;
    spec.L = 3.0;
    spec.beta = 1.0;
    spec.b = [](std::span<const double> x, double, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = -x[k];
    };
    spec.sigma = [](std::span<const double>, double) { return 1.0; };
    const int n_paths = static_cast<int>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        auto bundles =
            dq::simulate_ensemble(spec, std::vector<double>{0.0}, 1.0 / 512.0, 1.0, n_paths, seed++,
                                  {1.0, 1});
        benchmark::DoNotOptimize(bundles.data());
    }
    state.SetItemsProcessed(state.iterations() * n_paths);
}
BENCHMARK(BM_SimulateOU)->Arg(64)->Arg(256);

void BM_LloydScalar(benchmark::State& state) {
    const auto sample = dq::standard_normal_sample(static_cast<int>(state.range(0)), 5);
    for (auto _ : state) {
        auto q = dq::lloyd_scalar(sample, 16);
        benchmark::DoNotOptimize(q.mse);
    }
}
BENCHMARK(BM_LloydScalar)->Arg(10000)->Arg(100000);

void BM_NearestSup(benchmark::State& state) {
    dq::ProductCodebookOptions pc;
    pc.samples_per_coord = 20000;
    pc.dt = 1.0 / 512.0;
    pc.norm = dq::Norm::sup();
    const double rate = std::log(static_cast<double>(state.range(0)));
    const dq::Codebook cb = dq::product_codebook(rate, dq::default_kl_m(rate), {}, 3, pc);
    const dq::SampledPath w = brownian(pc.dt, 0);
    for (auto _ : state) {
        auto r = dq::nearest(cb, w, dq::Norm::sup());
        benchmark::DoNotOptimize(r.dist);
    }
    state.SetLabel(std::to_string(cb.size()) + " entries");
}
BENCHMARK(BM_NearestSup)->Arg(256)->Arg(1024)->Arg(4096);

void BM_NearestL2Fast(benchmark::State& state) {
    dq::ProductCodebookOptions pc;
    pc.samples_per_coord = 20000;
    pc.dt = 1.0 / 512.0;
    const double rate = std::log(static_cast<double>(state.range(0)));
    const dq::Codebook cb = dq::product_codebook(rate, dq::default_kl_m(rate), {}, 3, pc);
    const dq::SampledPath w = brownian(pc.dt, 1);
    for (auto _ : state) {
        auto r = dq::nearest_l2_fast(cb, w);
        benchmark::DoNotOptimize(r.dist);
    }
}
BENCHMARK(BM_NearestL2Fast)->Arg(256)->Arg(4096);

void BM_HolderSeminorm(benchmark::State& state) {
    const dq::SampledPath w = brownian(1.0 / static_cast<double>(state.range(0)), 2);
    for (auto _ : state) {
        const double s = dq::holder_seminorm(w, 0.2);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_HolderSeminorm)->Arg(512)->Arg(2048);

}  // namespace
