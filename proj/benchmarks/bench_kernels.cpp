// Serial reference loops vs. their OpenMP twins. The pairs are bitwise
// equivalent (the unit tests check that); this target measures what the
// parallel versions actually buy at a given thread count. Run with
// --benchmark_time_unit=ms; OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include <vector>

#include "wmlab/analysis.hpp"
#include "wmlab/pipeline.hpp"

namespace {

wmlab::ExperimentConfig bench_config(int samples) {
    wmlab::ExperimentConfig cfg;
    cfg.model.vocab_size = 128;
    cfg.model.seed = 11;
    cfg.scheme.key = 42;
    cfg.attack.restarts = 2;
    cfg.attack.max_length = 120;
    cfg.attack.window = 450;
    cfg.sample_count = samples;
    cfg.gen_length = 120;
    cfg.prompt_length = 4;
    cfg.seed = 5;
    return cfg;
}

const std::vector<double> kSchedule = {0.45, 0.5, 0.55, 0.4};

void bm_monte_carlo_serial(benchmark::State& state) {
    const long trials = state.range(0);
    for (auto _ : state) {
        auto r = wmlab::monte_carlo_theorem2_serial(230, kSchedule, 0.6, 0.1,
                                                    trials, 901);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * trials);
}

void bm_monte_carlo_parallel(benchmark::State& state) {
    const long trials = state.range(0);
    for (auto _ : state) {
        auto r = wmlab::monte_carlo_theorem2(230, kSchedule, 0.6, 0.1, trials,
                                             901, /*jobs=*/0);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * trials);
}

void bm_generate_serial(benchmark::State& state) {
    const auto cfg = bench_config(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto corpus = wmlab::generate_corpus_serial(cfg);
        benchmark::DoNotOptimize(corpus);
    }
    state.SetItemsProcessed(state.iterations() * cfg.sample_count);
}

void bm_generate_parallel(benchmark::State& state) {
    const auto cfg = bench_config(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto corpus = wmlab::generate_corpus(cfg, /*jobs=*/0);
        benchmark::DoNotOptimize(corpus);
    }
    state.SetItemsProcessed(state.iterations() * cfg.sample_count);
}

void bm_attack_serial(benchmark::State& state) {
    const auto cfg = bench_config(static_cast<int>(state.range(0)));
    const auto base = wmlab::generate_corpus_serial(cfg);
    for (auto _ : state) {
        auto corpus = base;
        auto log = wmlab::attack_corpus_serial(cfg, corpus);
        benchmark::DoNotOptimize(log);
    }
    state.SetItemsProcessed(state.iterations() * cfg.sample_count);
}

void bm_attack_parallel(benchmark::State& state) {
    const auto cfg = bench_config(static_cast<int>(state.range(0)));
    const auto base = wmlab::generate_corpus_serial(cfg);
    for (auto _ : state) {
        auto corpus = base;
        auto log = wmlab::attack_corpus(cfg, corpus, /*jobs=*/0);
        benchmark::DoNotOptimize(log);
    }
    state.SetItemsProcessed(state.iterations() * cfg.sample_count);
}

BENCHMARK(bm_monte_carlo_serial)->Arg(2000)->Arg(20000);
BENCHMARK(bm_monte_carlo_parallel)->Arg(2000)->Arg(20000);
BENCHMARK(bm_generate_serial)->Arg(16)->Arg(64);
BENCHMARK(bm_generate_parallel)->Arg(16)->Arg(64);
BENCHMARK(bm_attack_serial)->Arg(8)->Arg(32);
BENCHMARK(bm_attack_parallel)->Arg(8)->Arg(32);

} // namespace

BENCHMARK_MAIN();
