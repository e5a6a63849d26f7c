#include <benchmark/benchmark.h>

#include <random>

#include "red/bench.hpp"
#include "red/eds.hpp"
#include "red/expression.hpp"
#include "red/residual.hpp"

namespace {

red::BenchmarkEquation fig2_equation() {
    red::BenchmarkEquation eq;
    eq.id = "fig2";
    eq.equation_text = "sin(x0) * x0 + ln(x1 ^ 2)";
    eq.equation = red::parse_expression(eq.equation_text);
    eq.ranges = {{-5.0, 5.0}, {1.0, 5.0}};
    return eq;
}

void BM_ParsePrint(benchmark::State& state) {
    const std::string text = "sin(x0) * x0 + ln(x1 ^ 2) + sqrt(x2) / (1 + exp(0 - x0))";
    for (auto _ : state) {
        const red::Expression e = red::parse_expression(text);
        benchmark::DoNotOptimize(red::print_expression(e));
    }
}
BENCHMARK(BM_ParsePrint);

void BM_Evaluate(benchmark::State& state) {
    const auto eq = fig2_equation();
    const red::Dataset data = red::sample_dataset(eq, static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(red::evaluate(eq.equation, data));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(300)->Arg(3000);

// The residual walk should cost about as much as one plain evaluation;
// comparing the two benchmarks shows the overhead directly.
void BM_ComputeResidual(benchmark::State& state) {
    const auto eq = fig2_equation();
    const red::Dataset data = red::sample_dataset(eq, static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(red::compute_residual(eq.equation, 6, data));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeResidual)->Arg(300)->Arg(3000);

void BM_GpFitLinear(benchmark::State& state) {
    red::BenchmarkEquation eq;
    eq.id = "line";
    eq.equation_text = "2 * x0 + 1";
    eq.equation = red::parse_expression(eq.equation_text);
    eq.ranges = {{-5.0, 5.0}};
    const red::Dataset data = red::sample_dataset(eq, 180, 3);
    red::GpConfig config;
    config.population_size = static_cast<std::size_t>(state.range(0));
    config.generations = 10;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        config.rng_seed = seed++;
        red::BuiltinGp gp(config);
        benchmark::DoNotOptimize(gp.fit(data, red::FitTarget::from_column(data.y())));
    }
}
BENCHMARK(BM_GpFitLinear)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RefitConstants(benchmark::State& state) {
    red::BenchmarkEquation eq;
    eq.id = "wave";
    eq.equation_text = "2.5 * sin(1.3 * x0) + 0.7";
    eq.equation = red::parse_expression(eq.equation_text);
    eq.ranges = {{-3.0, 3.0}};
    const red::Dataset data = red::sample_dataset(eq, 180, 5);
    const red::Expression start = red::parse_expression("2 * sin(1.1 * x0) + 1");
    const red::FitTarget target = red::FitTarget::from_column(data.y());
    for (auto _ : state) {
        benchmark::DoNotOptimize(red::refit_constants(start, data, target));
    }
}
BENCHMARK(BM_RefitConstants)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
