#include <benchmark/benchmark.h>

#include "aodfill/grid.hpp"
#include "aodfill/rng.hpp"

using namespace aodfill;

namespace {

Grid bench_grid(int size, double valid_fraction) {
    Rng rng(0xbe7c4);
    Grid g(size, size, 0.0, size, 1.0, "bench");
    for (int row = 0; row < size; ++row)
        for (int col = 0; col < size; ++col)
            if (rng.next_double() < valid_fraction)
                g.set(col, row, rng.uniform_real(0, 1000));
    return g;
}

void BM_MeanFilter(benchmark::State& state) {
    const Grid g = bench_grid(static_cast<int>(state.range(0)), 0.4);
    const FilterConfig cfg{static_cast<int>(state.range(1)), true, 1};
    const int threads = static_cast<int>(state.range(2));
    for (auto _ : state) {
        Grid out = mean_filter(g, cfg, threads);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * g.cell_count());
}

void BM_CombineFirstValid(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const std::vector<Grid> layers = {bench_grid(size, 0.4), bench_grid(size, 0.7),
                                      bench_grid(size, 1.0)};
    for (auto _ : state) {
        Grid out = combine_first_valid(layers);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * layers[0].cell_count());
}

void BM_ResampleNearest(benchmark::State& state) {
    const Grid src = bench_grid(static_cast<int>(state.range(0)), 0.9);
    const Grid tmpl(512, 512, 0.0, src.n_rows(), src.n_rows() / 512.0);
    for (auto _ : state) {
        Grid out = resample_nearest(src, tmpl);
        benchmark::DoNotOptimize(out);
    }
}

} // namespace

BENCHMARK(BM_MeanFilter)
    ->Args({128, 11, 1})
    ->Args({256, 11, 1})
    ->Args({256, 11, 0})
    ->Args({256, 3, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CombineFirstValid)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ResampleNearest)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
