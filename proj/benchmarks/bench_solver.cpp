#include <benchmark/benchmark.h>

#include <random>

#include "fqc/presets.hpp"
#include "fqc/relu_convex.hpp"
#include "fqc/rng.hpp"

namespace {

Eigen::MatrixXd random_design(int n, int d, std::uint64_t seed) {
    auto rng = fqc::make_rng(seed, "bench-design");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) X(r, c) = unit(rng);
    return X;
}

void BM_L1Projection(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    auto rng = fqc::make_rng(1, "bench-proj");
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(fqc::l1_ball_projection(x, 1.0));
}
BENCHMARK(BM_L1Projection)->Arg(64)->Arg(512)->Arg(4096);

void BM_SampleGates(benchmark::State& state) {
    const Eigen::MatrixXd X = random_design(static_cast<int>(state.range(0)), 6, 2);
    for (auto _ : state) {
        auto rng = fqc::make_rng(3, "bench-gates");
        benchmark::DoNotOptimize(fqc::sample_gates(X, 32, rng));
    }
}
BENCHMARK(BM_SampleGates)->Arg(256)->Arg(2048);

void BM_ProjectedGradientDescent(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Eigen::MatrixXd X = random_design(n, 6, 4);
    auto rng = fqc::make_rng(5, "bench-pgd");
    const fqc::GateSet gates = fqc::sample_gates(X, 32, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = normal(rng);
    fqc::PgdOptions opts;
    opts.steps = 200;
    opts.radius = 10.0;
    for (auto _ : state)
        benchmark::DoNotOptimize(fqc::projected_gradient_descent(X, y, gates, opts));
}
BENCHMARK(BM_ProjectedGradientDescent)->Arg(512)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
