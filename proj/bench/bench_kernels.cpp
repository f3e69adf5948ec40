// Parallel kernels against their serial references.
//   ./bench_kernels --benchmark_filter=Hampel
// Thread count comes from OMP_NUM_THREADS.

#include "telesim/metrics.hpp"
#include "telesim/pupil.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace telesim;

namespace {

std::vector<double> noisy(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = g(rng) + (i % 101 == 0 ? 25.0 : 0.0);
    return x;
}

RgbFrame frame(int w, int h) {
    std::mt19937_64 rng(2);
    RgbFrame f(w, h);
    for (auto& c : f.rgb) c = static_cast<std::uint8_t>(rng());
    return f;
}

std::vector<TrialConfig> batch(std::size_t n) {
    std::vector<TrialConfig> out;
    for (std::size_t i = 0; i < n; ++i) {
        TrialConfig c;
        c.condition = make_condition(i % 2 ? ConditionKind::synchronous : ConditionKind::anchoring, 750);
        c.seed = i + 1;
        c.synthetic_pupil = false;
        out.push_back(c);
    }
    return out;
}

template <auto Fn>
void BM_Hampel(benchmark::State& state) {
    const auto x = noisy(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(x, HampelOptions{}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Luminance(benchmark::State& state) {
    const RgbFrame f = frame(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) * 3 / 4);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pixels()));
}

template <auto Fn>
void BM_Batch(benchmark::State& state) {
    const auto configs = batch(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(configs, RunOptions{false}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<double> hampel_parallel(std::span<const double> x, HampelOptions o) { return hampel_filter(x, o); }

} // namespace

BENCHMARK(BM_Hampel<hampel_filter_serial>)->Name("Hampel/serial")->Arg(5400)->Arg(100000);
BENCHMARK(BM_Hampel<hampel_parallel>)->Name("Hampel/parallel")->Arg(5400)->Arg(100000);
BENCHMARK(BM_Luminance<frame_luminance_serial>)->Name("Luminance/serial")->Arg(640)->Arg(1920);
BENCHMARK(BM_Luminance<frame_luminance>)->Name("Luminance/parallel")->Arg(640)->Arg(1920);
BENCHMARK(BM_Batch<run_batch_serial>)->Name("Batch/serial")->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batch<run_batch>)->Name("Batch/parallel")->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
