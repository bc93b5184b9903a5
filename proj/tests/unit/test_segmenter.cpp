#include "astprep/segmenter.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <array>
#include <stdexcept>

using namespace astprep;
using astprep::testing::breaks_by_spans;
using astprep::testing::exhaustive_partition;

namespace {

// Direct straddle count: entry i is the number of multi-token nodes with
// l <= i < r; entry n is always 0.
std::vector<std::int32_t> straddle_oracle(const SpanTree& t) {
    std::vector<std::int32_t> out(static_cast<std::size_t>(t.token_count()) + 1, 0);
    for (std::int32_t i = 0; i < t.token_count(); ++i)
        for (const SpanNode& n : t.nodes())
            if (n.l <= i && i < n.r) ++out[i];
    return out;
}

std::vector<std::int32_t> chunk_lengths(const Segmentation& s) {
    std::vector<std::int32_t> out;
    for (Chunk c : s.chunks()) out.push_back(c.size());
    return out;
}

struct WindowCheck final : DpObserver {
    std::int32_t max_len = 0;
    std::int64_t states = 0;
    std::int64_t violations = 0;
    void on_state(std::int32_t, std::int32_t i, std::int32_t best_j, std::span<const std::int64_t> prev) override {
        ++states;
        std::int32_t want = std::max(0, i - max_len);
        for (std::int32_t j = want + 1; j < i; ++j)
            if (prev[j] < prev[want]) want = j;
        if (want != best_j) ++violations;
    }
};

}  // namespace

TEST_CASE("build_cost examples") {
    SpanTree two = span_tree_from_spans(10, {{0, 9}, {0, 4}, {5, 9}});
    // Oracle first, then the frozen values it produced.
    CHECK(straddle_oracle(two) == std::vector<std::int32_t>{2, 2, 2, 2, 1, 2, 2, 2, 2, 0, 0});
    CHECK(build_cost(two).cost == std::vector<std::int32_t>{2, 2, 2, 2, 1, 2, 2, 2, 2, 0, 0});

    SpanTree flat = span_tree_from_spans(5, {{0, 4}});
    CHECK(build_cost(flat).cost == std::vector<std::int32_t>{1, 1, 1, 1, 0, 0});

    SpanTree single = span_tree_from_spans(1, {});
    CHECK(build_cost(single).cost == std::vector<std::int32_t>{0, 0});
}

TEST_CASE("cost_from_spans agrees with build_cost") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        SpanTree t = testing::random_span_tree(rng, static_cast<std::int32_t>(rng.uniform_int(1, 120)));
        std::vector<TokenSpan> spans = subtree_spans(t);
        CHECK(cost_from_spans(t.token_count(), spans).cost == build_cost(t).cost);
        CHECK(build_cost(t).cost == straddle_oracle(t));
    }
    std::vector<TokenSpan> bad{{3, 12}};
    CHECK_THROWS_AS(cost_from_spans(10, bad), std::invalid_argument);
}

TEST_CASE("greedy examples") {
    CHECK(chunk_lengths(segment_greedy(112, 48)) == std::vector<std::int32_t>{48, 48, 16});
    CHECK(chunk_lengths(segment_greedy(10, 48)) == std::vector<std::int32_t>{10});
    CHECK(chunk_lengths(segment_greedy(96, 48)) == std::vector<std::int32_t>{48, 48});
    CHECK(segment_greedy(0, 48).cuts.empty());
    CHECK_THROWS_AS(segment_greedy(10, 0), std::invalid_argument);
}

TEST_CASE("dp examples") {
    SpanTree two = span_tree_from_spans(10, {{0, 9}, {0, 4}, {5, 9}});
    CostArray cost = build_cost(two);
    // Exhaustive enumeration is the oracle for the expected partition.
    testing::Partition want = exhaustive_partition(two, 5);
    CHECK(want.breaks == 1);
    CHECK(want.cuts == std::vector<std::int32_t>{5, 10});
    for (const Segmentation& s : {segment_dp_naive(cost, 5), segment_dp(cost, 5)}) {
        CHECK(s.total_breaks == 1);
        CHECK(s.cuts == std::vector<std::int32_t>{5, 10});
    }

    Segmentation one = segment_dp(cost, 10);
    CHECK(one.cuts == std::vector<std::int32_t>{10});
    CHECK(one.total_breaks == 0);

    CHECK(segment_dp(CostArray{}, 4).cuts.empty());
    CHECK_THROWS_AS(segment_dp(cost, 0), std::invalid_argument);
    CHECK_THROWS_AS(segment_dp_naive(cost, -3), std::invalid_argument);
}

TEST_CASE("nested class: greedy breaks 9, dp breaks 3") {
    SpanTree t = testing::nested_class_tree();
    CostArray cost = build_cost(t);
    Segmentation greedy = segment_greedy(cost, testing::kNestedClassMaxLen);
    Segmentation dp = segment_dp(cost, testing::kNestedClassMaxLen);
    CHECK(greedy.total_breaks == 9);
    CHECK(count_breaks(t, greedy) == 9);
    CHECK(dp.total_breaks == 3);
    CHECK(count_breaks(t, dp) == 3);
    CHECK(dp.cuts == std::vector<std::int32_t>{41, 64, 112});
    CHECK(segment_dp_naive(cost, testing::kNestedClassMaxLen) == dp);
}

TEST_CASE("zero cost picks the fewest chunks, earliest last cut") {
    CostArray zero;
    zero.cost.assign(11, 0);
    Segmentation s = segment_dp(zero, 4);
    CHECK(s.cuts == std::vector<std::int32_t>{2, 6, 10});
    CHECK(s.total_breaks == 0);
    // A lone root costs 1 per cut, so the same shape is forced; the oracle
    // applies the tie-break independently.
    CHECK(exhaustive_partition(span_tree_from_spans(10, {}), 4).cuts == s.cuts);
}

TEST_CASE("extra chunks are used when they avoid breaks") {
    std::vector<TokenSpan> spans{{3, 6}};
    CostArray cost = cost_from_spans(10, spans);
    Segmentation s = segment_dp(cost, 5);
    CHECK(s.total_breaks == 0);
    CHECK(s.chunk_count() == 3);
    CHECK(segment_dp_naive(cost, 5) == s);
}

TEST_CASE("count_breaks") {
    SpanTree t = testing::nested_class_tree();
    CHECK(count_breaks(t, segment_greedy(112, 200)) == 0);
    Segmentation wrong;
    wrong.cuts = {50, 100};
    CHECK_THROWS_AS(count_breaks(t, wrong), std::invalid_argument);
}

TEST_CASE("check_feasible") {
    Segmentation s;
    s.cuts = {3, 6, 10};
    CHECK_NOTHROW(check_feasible(s, 10, 4));
    CHECK_THROWS_AS(check_feasible(s, 10, 3), std::invalid_argument);
    CHECK_THROWS_AS(check_feasible(s, 11, 4), std::invalid_argument);
    s.cuts = {3, 3, 10};
    CHECK_THROWS_AS(check_feasible(s, 10, 8), std::invalid_argument);
}

TEST_CASE("large max_len switches back-pointer width") {
    Rng rng(8);
    SpanTree t = testing::random_span_tree(rng, 70000, 6, 0.9);
    CostArray cost = build_cost(t);
    Segmentation s = segment_dp(cost, 66000);
    check_feasible(s, 70000, 66000);
    CHECK(s.total_breaks == count_breaks(t, s));
    CHECK(s.total_breaks <= segment_greedy(cost, 66000).total_breaks);
}

TEST_CASE("max_chunk_count") {
    CHECK(max_chunk_count(0, 8) == 0);
    CHECK(max_chunk_count(5, 8) == 2);
    CHECK(max_chunk_count(1, 8) == 1);
    CHECK(max_chunk_count(17, 8) == 6);
    CHECK(max_chunk_count(3, 1) == 3);
}

TEST_CASE("property: dp, naive and exhaustive agree") {
    Rng rng(1234);
    for (int trial = 0; trial < 400; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, trial < 150 ? 18 : 160));
        const std::int32_t max_len = std::array{1, 2, 3, 5, 8, 16, 32}[rng.below(7)];
        SpanTree t = testing::random_span_tree(rng, n);
        CostArray cost = build_cost(t);
        Segmentation fast = segment_dp(cost, max_len);
        Segmentation slow = segment_dp_naive(cost, max_len);
        Segmentation greedy = segment_greedy(cost, max_len);
        CHECK(fast == slow);
        check_feasible(fast, n, max_len);
        CHECK(fast.total_breaks <= greedy.total_breaks);
        CHECK(count_breaks(t, fast) == fast.total_breaks);
        CHECK(breaks_by_spans(t, fast.cuts) == fast.total_breaks);
        CHECK(count_breaks(t, greedy) == greedy.total_breaks);
        if (n <= 18) {
            testing::Partition best = exhaustive_partition(t, max_len);
            CHECK(best.breaks == fast.total_breaks);
            CHECK(best.cuts == fast.cuts);
        }
    }
}

TEST_CASE("property: count_breaks equals summed cost at random cuts") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, 200));
        SpanTree t = testing::random_span_tree(rng, n);
        Segmentation s;
        for (std::int32_t c = 1; c < n; ++c)
            if (rng.below(5) == 0) s.cuts.push_back(c);
        s.cuts.push_back(n);
        CostArray cost = build_cost(t);
        CHECK(count_breaks(t, s) == score(cost, s));
        CHECK(count_breaks(t, s) == breaks_by_spans(t, s.cuts));
    }
}

TEST_CASE("property: queue front is the window minimum") {
    Rng rng(4321);
    for (int trial = 0; trial < 60; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, 300));
        const std::int32_t max_len = std::array{2, 7, 16, 40}[rng.below(4)];
        SpanTree t = testing::random_span_tree(rng, n);
        WindowCheck check;
        check.max_len = max_len;
        segment_dp(build_cost(t), max_len, &check);
        CHECK(check.states == static_cast<std::int64_t>(max_chunk_count(n, max_len)) * n);
        CHECK(check.violations == 0);
    }
}

TEST_CASE("measure_segmentation") {
    SpanTree t = testing::nested_class_tree();
    Segmentation dp;
    SegmentStats s = measure_segmentation(build_cost(t), 48, &dp);
    CHECK(s.n == 112);
    CHECK(s.k_chosen == 3);
    CHECK(s.greedy_breaks == 9);
    CHECK(s.dp_breaks == 3);
    CHECK(s.dp_runtime_micros >= 0);
    CHECK(dp.cuts == std::vector<std::int32_t>{41, 64, 112});
}
