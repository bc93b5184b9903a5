// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every bound a criterion is judged against lives in `limits`.

#include "astprep/corruptor.hpp"
#include "astprep/errors.hpp"
#include "astprep/pipeline.hpp"
#include "astprep/segmenter.hpp"
#include "astprep/tree_sitter_backend.hpp"

#include "fixtures.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;
using namespace astprep;
namespace ts = astprep::testing;

namespace limits {
constexpr int kOracleTrees = 1000;
constexpr std::int32_t kOracleMaxN = 200;
constexpr std::int32_t kExhaustiveMaxN = 24;
constexpr double kOracleSeconds = 120.0;

constexpr std::int32_t kPerfTokens = 100'000;
constexpr std::int32_t kPerfMaxLen = 1024;
constexpr double kPerfSeconds = 1.0;
constexpr std::int32_t kSpeedupTokens = 20'000;
constexpr double kMinSpeedup = 50.0;

constexpr int kQuotaCases = 10'000;
constexpr int kRoundTripCases = 10'000;

constexpr int kGranularitySamples = 1000;
constexpr double kMinGranularityRatio = 2.0;

constexpr std::int32_t kUniformLeaves = 256;
constexpr int kUniformSamples = 20'000;
constexpr double kUniformLow = 0.20;
constexpr double kUniformHigh = 0.30;

constexpr int kCorpusFiles = 50;
constexpr std::int32_t kCorpusMaxLen = 1024;
}  // namespace limits

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <class... Args>
std::string format(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(0xAC1);
    int mismatches = 0, exhaustive = 0, exhaustive_mismatches = 0;
    for (int trial = 0; trial < limits::kOracleTrees; ++trial) {
        const std::int32_t max_len = std::array{8, 16, 32}[rng.below(3)];
        // Roughly a third of the instances are small enough for enumeration.
        const std::int32_t hi = trial % 3 == 0 ? limits::kExhaustiveMaxN : limits::kOracleMaxN;
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, hi));
        SpanTree t = ts::random_span_tree(rng, n);
        CostArray cost = build_cost(t);
        Segmentation fast = segment_dp(cost, max_len);
        Segmentation slow = segment_dp_naive(cost, max_len);
        if (fast.total_breaks != slow.total_breaks || fast.cuts != slow.cuts) ++mismatches;
        if (n <= limits::kExhaustiveMaxN) {
            ++exhaustive;
            ts::Partition best = ts::exhaustive_partition(t, max_len);
            if (best.breaks != slow.total_breaks || best.cuts != slow.cuts) ++exhaustive_mismatches;
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && exhaustive_mismatches == 0 && exhaustive > 0 && secs < limits::kOracleSeconds,
            format("%d trees, %d dp/naive mismatches, %d/%d exhaustive mismatches, %.1fs (limit %.0fs)",
                   limits::kOracleTrees, mismatches, exhaustive_mismatches, exhaustive, secs, limits::kOracleSeconds)};
}

Outcome nested_class_reconstruction() {
    SpanTree t = ts::nested_class_tree();
    CostArray cost = build_cost(t);
    const std::int64_t greedy = segment_greedy(cost, ts::kNestedClassMaxLen).total_breaks;
    const std::int64_t dp = segment_dp(cost, ts::kNestedClassMaxLen).total_breaks;

    // The same numbers must come out of the corpus-level stats path.
    fs::path dir = ts::scratch_dir("accept-nested");
    ts::write_file(dir / "nested.toy", ts::nested_class_source());
    PipelineConfig cfg;
    cfg.inputs = {dir / "nested.toy"};
    cfg.max_len = ts::kNestedClassMaxLen;
    CorpusStats s = stats(cfg, VocabSpec::byte_level(), *ts::nested_class_backend());
    fs::remove_all(dir);

    return {greedy == 9 && dp == 3 && s.greedy_breaks == 9 && s.dp_breaks == 3,
            format("segmenter greedy=%lld dp=%lld, stats greedy=%lld dp=%lld (want 9 and 3)",
                   static_cast<long long>(greedy), static_cast<long long>(dp),
                   static_cast<long long>(s.greedy_breaks), static_cast<long long>(s.dp_breaks))};
}

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

Outcome performance() {
    Rng rng(0xBEEF);
    SpanTree big = ts::random_span_tree(rng, limits::kPerfTokens, 6, 0.9);
    const auto t0 = Clock::now();
    Segmentation s = segment_dp(build_cost(big), limits::kPerfMaxLen);
    const double big_secs = seconds_since(t0);
    check_feasible(s, limits::kPerfTokens, limits::kPerfMaxLen);

    SpanTree mid = ts::random_span_tree(rng, limits::kSpeedupTokens, 6, 0.9);
    CostArray cost = build_cost(mid);
    Segmentation a, b;
    const double fast = best_of(5, [&] { a = segment_dp(cost, limits::kPerfMaxLen); });
    const double slow = best_of(1, [&] { b = segment_dp_naive(cost, limits::kPerfMaxLen); });
    const double speedup = slow / fast;
    return {big_secs <= limits::kPerfSeconds && speedup >= limits::kMinSpeedup && a == b,
            format("100k tokens in %.1f ms (limit %.0f ms); n=20k speedup %.0fx (min %.0fx), results %s", big_secs * 1e3,
                   limits::kPerfSeconds * 1e3, speedup, limits::kMinSpeedup, a == b ? "equal" : "DIFFER")};
}

Outcome quota_exactness() {
    Rng gen(0x0A11);
    int subtree_bad = 0, vanilla_bad = 0;
    for (int i = 0; i < limits::kQuotaCases; ++i) {
        const auto n = static_cast<std::int32_t>(gen.uniform_int(1, 300));
        SpanTree t = ts::random_span_tree(gen, n);
        const auto m = static_cast<std::int32_t>(gen.uniform_int(0, n));
        const auto theta = static_cast<std::int32_t>(gen.uniform_int(1, 150));
        Rng rng(gen());
        CorruptionMask mask = mask_subtree(t, m, theta, rng);
        if (static_cast<std::int32_t>(mask.size()) != m || (!mask.empty() && mask.indices().back() >= n)) ++subtree_bad;

        CorruptionConfig cfg;
        cfg.mask_ratio = 0.01 + 0.6 * gen.uniform01();
        cfg.text_span_min = static_cast<std::int32_t>(gen.uniform_int(1, 4));
        cfg.text_span_max = cfg.text_span_min + static_cast<std::int32_t>(gen.uniform_int(0, 12));
        const auto nv = static_cast<std::int32_t>(gen.uniform_int(1, 2000));
        CorruptionMask v = mask_vanilla(nv, cfg, rng);
        if (static_cast<std::int32_t>(v.size()) != mask_quota(nv, cfg.mask_ratio) ||
            (!v.empty() && v.indices().back() >= nv))
            ++vanilla_bad;
    }
    return {subtree_bad == 0 && vanilla_bad == 0,
            format("%d cases: %d subtree and %d vanilla quota violations", limits::kQuotaCases, subtree_bad,
                   vanilla_bad)};
}

Outcome sentinel_round_trip() {
    Rng gen(0x5E47);
    VocabSpec vocab = VocabSpec::byte_level({}, 1024);
    int failures = 0;
    for (int i = 0; i < limits::kRoundTripCases; ++i) {
        const auto n = static_cast<std::int32_t>(gen.uniform_int(1, 1024));
        std::vector<TokenId> ids(static_cast<std::size_t>(n));
        for (TokenId& id : ids) id = static_cast<TokenId>(gen.below(vocab.content_size()));
        CorruptionMask mask;
        switch (i % 3) {
            case 0: {
                std::vector<std::uint8_t> flags(ids.size());
                const double p = gen.uniform01();
                for (auto& f : flags) f = gen.uniform01() < p;
                mask = CorruptionMask::from_flags(flags);
                break;
            }
            case 1: {
                SpanTree t = ts::random_span_tree(gen, n);
                mask = mask_subtree(t, mask_quota(n, 0.25), static_cast<std::int32_t>(gen.uniform_int(1, 100)), gen);
                break;
            }
            default:
                mask = mask_vanilla(n, CorruptionConfig{}, gen);
        }
        try {
            CorruptedExample ex = encode_sentinels(ids, mask, vocab);
            if (decode_sentinels(ex, vocab) != ids) ++failures;
        } catch (const Error&) {
            ++failures;
        }
    }
    return {failures == 0, format("%d cases, %d failures", limits::kRoundTripCases, failures)};
}

double mean_maximal_size(const SpanTree& t, std::int32_t theta, std::uint64_t seed) {
    const std::int32_t m = mask_quota(t.token_count(), 0.25);
    std::int64_t total = 0, count = 0;
    for (int s = 0; s < limits::kGranularitySamples; ++s) {
        Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(theta), static_cast<std::uint64_t>(s));
        CorruptionMask mask = mask_subtree(t, m, theta, rng);
        for (NodeIndex v : maximal_masked_subtrees(t, mask)) {
            total += t.node(v).size();
            ++count;
        }
    }
    return count ? static_cast<double>(total) / static_cast<double>(count) : 0.0;
}

Outcome granularity() {
    SpanTree t = ts::deep_tree();
    const double coarse = mean_maximal_size(t, 100, 0x6A4);
    const double fine = mean_maximal_size(t, 5, 0x6A4);
    const double ratio = fine > 0 ? coarse / fine : 0;
    return {ratio >= limits::kMinGranularityRatio,
            format("mean maximal subtree %.2f tokens at theta 100 vs %.2f at theta 5: %.2fx (min %.1fx)", coarse, fine,
                   ratio, limits::kMinGranularityRatio)};
}

Outcome leaf_uniformity() {
    SpanTree t = ts::balanced_tree(limits::kUniformLeaves);
    CorruptionConfig cfg;
    const std::int32_t m = mask_quota(limits::kUniformLeaves, cfg.mask_ratio);
    std::vector<std::int64_t> hits(limits::kUniformLeaves, 0);
    for (int s = 0; s < limits::kUniformSamples; ++s) {
        Rng rng = Rng::keyed(0x1EAF, 0, static_cast<std::uint64_t>(s));
        const std::int32_t theta = sample_theta(rng, cfg);
        const CorruptionMask mask = mask_subtree(t, m, theta, rng);
        for (std::int32_t i : mask.indices()) ++hits[i];
    }
    double lo = 1, hi = 0;
    for (std::int64_t h : hits) {
        const double f = static_cast<double>(h) / limits::kUniformSamples;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
    }
    return {lo >= limits::kUniformLow && hi <= limits::kUniformHigh,
            format("per-token frequency in [%.4f, %.4f] (allowed [%.2f, %.2f])", lo, hi, limits::kUniformLow,
                   limits::kUniformHigh)};
}

// Mixed corpus: Toy and Python code (some of it unparsable), Markdown and
// reStructuredText prose, a few files longer than one chunk.
void write_corpus(const fs::path& root) {
    Rng rng(0xC0);
    for (int i = 0; i < limits::kCorpusFiles; ++i) {
        const std::string stem = "f" + std::to_string(100 + i);
        switch (i % 10) {
            case 0:
            case 1:
            case 2:
                ts::write_file(root / "toy" / (stem + ".toy"),
                               ts::random_toy_program(rng, 4 + static_cast<int>(rng.below(i % 3 == 0 ? 300 : 40))));
                break;
            case 3:
            case 4:
            case 5:
                ts::write_file(root / "py" / (stem + ".py"),
                               ts::random_python_program(rng, 4 + static_cast<int>(rng.below(i % 2 ? 250 : 30))));
                break;
            case 6:
                ts::write_file(root / "docs" / (stem + ".md"), ts::random_markdown(rng, 2 + static_cast<int>(rng.below(60))));
                break;
            case 7:
                ts::write_file(root / "docs" / (stem + ".rst"), ts::random_markdown(rng, 2 + static_cast<int>(rng.below(60))));
                break;
            case 8:
                ts::write_file(root / "bad" / (stem + ".py"), ts::random_python_program(rng, 10) + "def broken(:\n");
                break;
            default:
                ts::write_file(root / "bad" / (stem + ".toy"), "while (x:\n" + ts::random_toy_program(rng, 10));
        }
    }
}

Outcome pipeline_determinism() {
    fs::path dir = ts::scratch_dir("accept-pipeline");
    write_corpus(dir / "corpus");
    PipelineConfig cfg;
    cfg.inputs = {dir / "corpus"};
    cfg.max_len = limits::kCorpusMaxLen;
    cfg.seed = 2024;
    VocabSpec vocab = load_vocab(ASTPREP_VOCAB_DIR, required_sentinels(cfg));
    CompositeBackend backend(grammar_dir_from_env());

    std::vector<std::string> outputs;
    CorpusStats first;
    for (int workers : {1, 4, 8}) {
        cfg.workers = workers;
        cfg.output = dir / ("out" + std::to_string(workers) + ".jsonl");
        CorpusStats s = run(cfg, vocab, backend);
        if (outputs.empty()) first = s;
        outputs.push_back(ts::read_file(cfg.output));
    }
    const bool identical = outputs[0] == outputs[1] && outputs[0] == outputs[2];

    std::unordered_map<std::string, const FileStats*> owner;
    for (const FileStats& f : first.files)
        for (std::int32_t k = 0; k < 4096; ++k) owner.emplace(record_id(f.path, k), &f);

    int budget = 0, routing = 0, quota = 0, orphan = 0, records = 0;
    std::istringstream lines(outputs[0]);
    for (std::string line; std::getline(lines, line); ++records) {
        ExampleRecord r = from_json_line(line);
        if (r.meta.n_chunk_tokens > cfg.max_len || static_cast<std::int32_t>(r.input_ids.size()) > cfg.max_len) ++budget;
        if (r.meta.n_masked != mask_quota(r.meta.n_chunk_tokens, cfg.corruption.mask_ratio)) ++quota;
        auto it = owner.find(r.id);
        if (it == owner.end()) {
            ++orphan;
            continue;
        }
        const FileStats& f = *it->second;
        const bool subtree = is_code(f.language) && f.parsed;
        if (r.language != f.language || language_for_path(f.path) != f.language || r.meta.theta.has_value() != subtree)
            ++routing;
    }
    std::size_t parsed_python = 0;
    for (const FileStats& f : first.files) parsed_python += f.language == Language::Python && f.parsed;
    fs::remove_all(dir);

    const bool ok = identical && budget == 0 && routing == 0 && quota == 0 && orphan == 0 && first.files_skipped == 0 &&
                    first.parse_fallbacks == 10 && parsed_python > 0 && first.files.size() == limits::kCorpusFiles;
    return {ok, format("%zu files, %d records, workers 1/4/8 %s; %d budget, %d routing, %d quota, %d orphan "
                       "violations; %lld fallbacks, %zu python files parsed",
                       first.files.size(), records, identical ? "byte-identical" : "DIFFER", budget, routing, quota,
                       orphan, static_cast<long long>(first.parse_fallbacks), parsed_python)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"oracle-equivalence", oracle_equivalence},
        {"nested-class-breaks", nested_class_reconstruction},
        {"performance", performance},
        {"mask-quota-exactness", quota_exactness},
        {"sentinel-round-trip", sentinel_round_trip},
        {"granularity", granularity},
        {"leaf-uniformity", leaf_uniformity},
        {"pipeline-determinism", pipeline_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
