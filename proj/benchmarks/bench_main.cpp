#include <benchmark/benchmark.h>

#include "fedgc/federation.hpp"
#include "fedgc/theory.hpp"

using namespace fedgc;

namespace {

Matrix noise(Index rows, Index cols, std::uint64_t id) {
    CounterRng rng(7, {static_cast<std::uint64_t>(StreamKind::test), id});
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

BlockSystem pair_system() {
    return BlockSystem(BlockSpec({1, 1}, {1, 1}), (Matrix(2, 2) << 0.7, 0.25, 0.25, 0.7).finished(),
                       Matrix::Identity(2, 2), 0.01, 0.01);
}

// Blocks of size d on M clients with a mildly coupled, stable A.
BlockSystem block_system(std::size_t M, Index d) {
    const Index n = static_cast<Index>(M) * d;
    Matrix a = noise(n, n, 1);
    a *= 0.8 / spectral_radius(a);
    std::vector<Index> dims(M, d);
    return BlockSystem(BlockSpec(dims, dims), a, Matrix::Identity(n, n), 0.01, 0.01);
}

void BM_Kron(benchmark::State& state) {
    const Index n = state.range(0);
    const Matrix x = noise(n, n, 2), y = noise(n, n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(kron(x, y));
}
BENCHMARK(BM_Kron)->Arg(4)->Arg(16)->Arg(32);

void BM_SpectralRadius(benchmark::State& state) {
    const Matrix a = noise(state.range(0), state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(spectral_radius(a));
}
BENCHMARK(BM_SpectralRadius)->Arg(8)->Arg(64)->Arg(256);

void BM_FederationRound(benchmark::State& state) {
    const BlockSystem sys = block_system(static_cast<std::size_t>(state.range(0)), state.range(1));
    const FederationSetup setup = prepare_federation(sys, simulate(sys, 50, 1, Vector::Zero(sys.spec().state_dim())));
    std::vector<Matrix> thetas;
    for (std::size_t m = 0; m < sys.spec().clients(); ++m)
        thetas.push_back(Matrix::Zero(sys.spec().dim(m), sys.spec().obs_dim(m)));
    const ServerModel server(sys.spec(), setup.a_diag, 0.05, zero_off_diagonal(sys.spec()));
    for (auto _ : state) benchmark::DoNotOptimize(federation_round(setup, thetas, server, 25, 0.05, 0.005));
}
BENCHMARK(BM_FederationRound)->Args({2, 1})->Args({4, 2})->Args({8, 4});

void BM_TrainingEpoch(benchmark::State& state) {
    const BlockSystem sys = pair_system();
    const std::size_t T = static_cast<std::size_t>(state.range(0));
    const FederationSetup setup = prepare_federation(sys, simulate(sys, T, 1, Vector::Zero(2)));
    TrainingConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 1;
    for (auto _ : state) benchmark::DoNotOptimize(run_training(setup, cfg));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * T));
}
BENCHMARK(BM_TrainingEpoch)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BuildRecurrence(benchmark::State& state) {
    const BlockSystem sys = block_system(3, state.range(0));
    const FederationSetup setup = prepare_federation(sys, simulate(sys, 20, 1, Vector::Zero(sys.spec().state_dim())));
    const RecurrenceInputs in = recurrence_inputs(setup, 0, 10);
    for (auto _ : state) benchmark::DoNotOptimize(build_recurrence(sys.spec(), 0, 10, in, 0.05, 0.005, 0.05));
}
BENCHMARK(BM_BuildRecurrence)->Arg(1)->Arg(2)->Arg(4);

}  // namespace
BENCHMARK_MAIN();
