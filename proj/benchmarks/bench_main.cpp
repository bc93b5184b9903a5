#include "astprep/corruptor.hpp"
#include "astprep/segmenter.hpp"
#include "astprep/tokenizer.hpp"

#include <benchmark/benchmark.h>

#include <functional>

namespace {

using namespace astprep;

// Recursive random splits; same shape family as the test fixtures but
// self-contained so benchmarks build without the test tree.
SpanTree synthetic_tree(std::int32_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledSpan> spans;
    std::function<void(std::int32_t, std::int32_t)> split = [&](std::int32_t l, std::int32_t r) {
        if (r - l < 2) return;
        const auto parts = static_cast<std::int32_t>(std::min<std::int64_t>(r - l + 1, rng.uniform_int(2, 6)));
        std::int32_t begin = l;
        for (std::int32_t p = 0; p < parts; ++p) {
            const std::int32_t left = r + 1 - begin;
            const std::int32_t len =
                p + 1 == parts ? left : static_cast<std::int32_t>(rng.uniform_int(1, left - (parts - p - 1)));
            const std::int32_t end = begin + len - 1;
            if (len >= 2 && rng.uniform01() < 0.9) {
                spans.push_back({begin, end, "Node"});
                split(begin, end);
            }
            begin = end + 1;
        }
    };
    spans.push_back({0, n - 1, "Root"});
    split(0, n - 1);
    return span_tree_from_spans(n, std::move(spans));
}

void BM_SegmentDp(benchmark::State& state) {
    const auto n = static_cast<std::int32_t>(state.range(0));
    CostArray cost = build_cost(synthetic_tree(n, 1));
    for (auto _ : state) benchmark::DoNotOptimize(segment_dp(cost, 1024));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SegmentDp)->Arg(20'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_SegmentDpNaive(benchmark::State& state) {
    const auto n = static_cast<std::int32_t>(state.range(0));
    CostArray cost = build_cost(synthetic_tree(n, 1));
    for (auto _ : state) benchmark::DoNotOptimize(segment_dp_naive(cost, 1024));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SegmentDpNaive)->Arg(20'000)->Unit(benchmark::kMillisecond);

void BM_BuildCost(benchmark::State& state) {
    SpanTree t = synthetic_tree(100'000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(build_cost(t));
}
BENCHMARK(BM_BuildCost)->Unit(benchmark::kMicrosecond);

void BM_MaskSubtree(benchmark::State& state) {
    SpanTree t = synthetic_tree(1024, 3);
    const auto theta = static_cast<std::int32_t>(state.range(0));
    Rng rng(4);
    for (auto _ : state) benchmark::DoNotOptimize(mask_subtree(t, mask_quota(1024, 0.25), theta, rng));
}
BENCHMARK(BM_MaskSubtree)->Arg(5)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_MaskVanilla(benchmark::State& state) {
    CorruptionConfig cfg;
    Rng rng(5);
    for (auto _ : state) benchmark::DoNotOptimize(mask_vanilla(1024, cfg, rng));
}
BENCHMARK(BM_MaskVanilla)->Unit(benchmark::kMicrosecond);

void BM_Tokenize(benchmark::State& state) {
    VocabSpec vocab = load_vocab(ASTPREP_VOCAB_DIR);
    std::string src;
    for (int i = 0; i < 2000; ++i)
        src += "def f" + std::to_string(i) + "(self, value):\n    return self.value + " + std::to_string(i) + "\n";
    for (auto _ : state) benchmark::DoNotOptimize(tokenize(vocab, src));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(src.size()));
}
BENCHMARK(BM_Tokenize)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
