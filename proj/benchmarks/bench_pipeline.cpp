#include <benchmark/benchmark.h>

#include "mcva/config.hpp"
#include "mcva/synthdata.hpp"
#include "mcva/trainer.hpp"

#include <filesystem>

using namespace mcva;

namespace {

// One-pair dataset in a temp dir, reused across runs.
std::string bench_dataset(int size) {
    const std::string dir = "/tmp/mcva_bench_data_" + std::to_string(size);
    if (!std::filesystem::exists(dir + "/manifest.txt")) {
        DatasetManifest m;
        m.seed = 9;
        m.count = 4;
        m.width = size;
        m.height = size;
        m.labeled = true;
        generate_dataset(dir, m);
    }
    return dir;
}

void BM_PretrainStep(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    TrainConfig cfg;
    cfg.data_dir = bench_dataset(size);
    cfg.steps = 1;
    cfg.log_path = "/tmp/mcva_bench_pre.log";
    int step = 0;
    for (auto _ : state) {
        cfg.seed = static_cast<std::uint64_t>(step++);
        auto out = run_pretraining(cfg, "/tmp/mcva_bench_pre.ckpt");
        benchmark::DoNotOptimize(out.losses.data());
    }
}
BENCHMARK(BM_PretrainStep)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_FinetuneStep(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    TrainConfig cfg;
    cfg.phase = Phase::kFinetune;
    cfg.lr_max = 1.25e-4;
    cfg.freeze_context_encoder = false;
    cfg.data_dir = bench_dataset(size);
    cfg.steps = 1;
    cfg.log_path = "/tmp/mcva_bench_fin.log";
    int step = 0;
    for (auto _ : state) {
        cfg.seed = static_cast<std::uint64_t>(step++);
        auto out = run_finetuning(cfg, nullptr, "/tmp/mcva_bench_fin.ckpt");
        benchmark::DoNotOptimize(out.losses.data());
    }
}
BENCHMARK(BM_FinetuneStep)->Arg(64)->Arg(96)->Unit(benchmark::kMillisecond);

} // namespace
