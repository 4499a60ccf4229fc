#include <benchmark/benchmark.h>

#include "mcva/attention.hpp"
#include "mcva/conv.hpp"
#include "mcva/costvol.hpp"
#include "mcva/masking.hpp"
#include "mcva/ops.hpp"
#include "mcva/rng.hpp"

using namespace mcva;

namespace {

TensorPtr<float> rand_tensor(Shape shape, Rng& rng, bool grad = false) {
    auto t = make_tensor<float>(std::move(shape));
    for (auto& v : t->data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    t->requires_grad = grad;
    return t;
}

void BM_Linear(benchmark::State& state) {
    Rng rng(1);
    const int rows = static_cast<int>(state.range(0));
    auto x = rand_tensor({rows, 64}, rng);
    auto w = rand_tensor({64, 64}, rng);
    auto b = rand_tensor({64}, rng);
    for (auto _ : state) {
        Tape<float> tape;
        tape.check_finite = false;
        auto y = linear(tape, x, w, b);
        benchmark::DoNotOptimize(y->data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows) * 64 * 64);
}
BENCHMARK(BM_Linear)->Arg(256)->Arg(2048);

void BM_TokenizerConv(benchmark::State& state) {
    Rng rng(2);
    const int n = static_cast<int>(state.range(0)); // source pixels
    const int hc = static_cast<int>(state.range(1));
    auto x = rand_tensor({n, 64, hc / 2, hc / 2}, rng);
    auto w = rand_tensor({64, 64, 3, 3}, rng);
    auto b = rand_tensor({64}, rng);
    for (auto _ : state) {
        Tape<float> tape;
        tape.check_finite = false;
        auto y = conv2d_batched(tape, x, w, b, 2);
        benchmark::DoNotOptimize(y->data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) *
                            64 * (hc / 4) * (hc / 4) * 64 * 9);
}
BENCHMARK(BM_TokenizerConv)->Args({256, 16})->Args({1024, 32});

void BM_Attention(benchmark::State& state) {
    Rng rng(3);
    const int groups = static_cast<int>(state.range(0));
    const int t = static_cast<int>(state.range(1));
    auto q = rand_tensor({groups * t, 64}, rng);
    auto k = rand_tensor({groups * t, 64}, rng);
    auto v = rand_tensor({groups * t, 64}, rng);
    for (auto _ : state) {
        Tape<float> tape;
        tape.check_finite = false;
        auto y = attention_grouped(tape, q, k, v,
                                   std::shared_ptr<const std::vector<std::int64_t>>(
                                       uniform_offsets(groups, t)),
                                   t, false);
        benchmark::DoNotOptimize(y->data.data());
    }
}
BENCHMARK(BM_Attention)->Args({256, 8})->Args({128, 16});

void BM_CostVolume(benchmark::State& state) {
    Rng rng(4);
    const int g = static_cast<int>(state.range(0));
    FeatureMap<float> f1{rand_tensor({32, g, g}, rng), 4};
    FeatureMap<float> f2{rand_tensor({32, g, g}, rng), 4};
    for (auto _ : state) {
        Tape<float> tape;
        tape.check_finite = false;
        auto cv = build_cost_volume(tape, f1, f2);
        benchmark::DoNotOptimize(cv.values->data.data());
    }
}
BENCHMARK(BM_CostVolume)->Arg(16)->Arg(32);

void BM_LeakageOracle(benchmark::State& state) {
    Rng rng(5);
    const int g = static_cast<int>(state.range(0));
    std::vector<float> maps(static_cast<std::size_t>(g) * g * g * g);
    for (auto& v : maps) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Rng mrng(7);
    auto part = partition_blocks(g, g, g / 4, g, mrng);
    auto masks = generate_block_sharing_masks(std::move(part), g, g, 0.5, mrng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(leakage_oracle_mse(maps.data(), g, g, masks));
    }
}
BENCHMARK(BM_LeakageOracle)->Arg(32)->Unit(benchmark::kMillisecond);

} // namespace
