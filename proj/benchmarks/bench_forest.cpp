#include <benchmark/benchmark.h>

#include "aodfill/forest.hpp"
#include "aodfill/rng.hpp"

using namespace aodfill;

namespace {

struct Dataset {
    Matrix X;
    std::vector<double> y;
};

Dataset bench_data(std::size_t n, std::size_t p) {
    Rng rng(0xbe7c5);
    Dataset d{Matrix(n, p), std::vector<double>(n)};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) d.X(r, c) = rng.uniform_real(-1, 1);
        d.y[r] = d.X(r, 0) * 300.0 + d.X(r, 1) * d.X(r, 2) * 100.0 +
                 rng.normal() * 30.0;
    }
    return d;
}

void BM_FitForest(benchmark::State& state) {
    const Dataset d = bench_data(static_cast<std::size_t>(state.range(0)), 16);
    Hyperparams params;
    params.n_trees = static_cast<int>(state.range(1));
    params.max_features = MaxFeatures::sqrt();
    const int threads = static_cast<int>(state.range(2));
    for (auto _ : state) {
        RandomForestModel model = fit_forest(d.X, d.y, params, 7, {}, {}, threads);
        benchmark::DoNotOptimize(model);
    }
}

void BM_Predict(benchmark::State& state) {
    const Dataset train = bench_data(400, 16);
    Hyperparams params;
    params.n_trees = 200;
    params.max_features = MaxFeatures::sqrt();
    const RandomForestModel model = fit_forest(train.X, train.y, params, 7);
    const Dataset fresh = bench_data(static_cast<std::size_t>(state.range(0)), 16);
    const int threads = static_cast<int>(state.range(1));
    for (auto _ : state) {
        auto pred = predict(model, fresh.X, threads);
        benchmark::DoNotOptimize(pred);
    }
    state.SetItemsProcessed(state.iterations() * fresh.X.n_rows());
}

} // namespace

BENCHMARK(BM_FitForest)
    ->Args({200, 100, 1})
    ->Args({200, 100, 0})
    ->Args({1000, 100, 0})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict)
    ->Args({16384, 1})
    ->Args({16384, 0})
    ->Unit(benchmark::kMillisecond);
