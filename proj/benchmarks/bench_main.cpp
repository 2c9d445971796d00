#include <benchmark/benchmark.h>

#include <vector>

#include "fediron/dbn.hpp"
#include "fediron/fl.hpp"
#include "fediron/nn.hpp"
#include "fediron/rng.hpp"

using namespace fediron;

namespace {

constexpr std::size_t kFeatures = 38;
constexpr std::size_t kClasses = 10;

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

LabeledData random_data(std::size_t n, std::uint64_t seed) {
    LabeledData d{gaussian(n, kFeatures, seed), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(i % kClasses);
    return d;
}

void BM_ForwardBackward(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto model = init_xavier(dnn_preset_specs(), 1);
    const auto data = random_data(batch, 2);
    for (auto _ : state) {
        const auto cache = forward(model, data.features);
        auto grad = backward(model, cache, data.labels);
        benchmark::DoNotOptimize(grad);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128)->Arg(512);

void BM_TrainEpoch(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto model = init_xavier(dnn_preset_specs(), 1);
    const auto data = random_data(n, 3);
    TrainConfig cfg;
    cfg.batch_size = 128;
    for (auto _ : state) {
        auto result = train_local(model, data, cfg);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TrainEpoch)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_FedAvg(benchmark::State& state) {
    const auto clients = static_cast<std::size_t>(state.range(0));
    std::vector<ClientUpdate> updates;
    for (std::size_t i = 0; i < clients; ++i)
        updates.push_back({static_cast<int>(i + 1), init_xavier(dnn_preset_specs(), i), 100 + i});
    for (auto _ : state) {
        auto avg = aggregate_fedavg(updates);
        benchmark::DoNotOptimize(avg);
    }
}
BENCHMARK(BM_FedAvg)->Arg(10)->Arg(100);

void BM_Cd1(benchmark::State& state) {
    const auto hidden = static_cast<std::size_t>(state.range(0));
    const auto rbm = make_rbm(kFeatures, hidden, VisibleKind::gaussian, 4);
    const auto batch = gaussian(128, kFeatures, 5);
    const CdConfig cfg;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto step = cd1_update(rbm, batch, cfg, ++seed, zero_velocity(rbm));
        benchmark::DoNotOptimize(step);
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Cd1)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
