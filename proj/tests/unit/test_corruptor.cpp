#include "astprep/corruptor.hpp"
#include "astprep/errors.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <numeric>
#include <stdexcept>

using namespace astprep;

namespace {

std::int32_t masked_in(const CorruptionMask& m, std::int32_t l, std::int32_t r) {
    std::int32_t c = 0;
    for (std::int32_t i : m.indices()) c += (i >= l && i <= r);
    return c;
}

std::vector<TokenId> iota_ids(std::int32_t n, TokenId first = 0) {
    std::vector<TokenId> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), first);
    return v;
}

}  // namespace

TEST_CASE("config validation") {
    CorruptionConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    for (double r : {0.0, 1.0, -0.1, 1.5}) {
        CorruptionConfig bad = cfg;
        bad.mask_ratio = r;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
    CorruptionConfig theta = cfg;
    theta.theta_min = 0;
    CHECK_THROWS_AS(theta.validate(), ConfigError);
    theta.theta_min = 10;
    theta.theta_max = 9;
    CHECK_THROWS_AS(theta.validate(), ConfigError);
    CorruptionConfig span = cfg;
    span.text_span_min = 3;
    span.text_span_max = 2;
    CHECK_THROWS_AS(span.validate(), ConfigError);
}

TEST_CASE("mask_quota") {
    CHECK(mask_quota(100, 0.15) == 15);
    CHECK(mask_quota(100, 0.29) == 29);
    CHECK(mask_quota(4, 0.25) == 1);
    CHECK(mask_quota(3, 0.25) == 0);
    CHECK(mask_quota(1024, 0.25) == 256);
    CHECK(mask_quota(0, 0.5) == 0);
}

TEST_CASE("CorruptionMask") {
    CorruptionMask m({1, 2, 4, 5, 6, 9});
    CHECK(m.size() == 6);
    CHECK(m.contains(5));
    CHECK_FALSE(m.contains(3));
    CHECK(m.runs() == std::vector<MaskRun>{{1, 3}, {4, 7}, {9, 10}});
    CHECK_THROWS_AS(CorruptionMask({2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(CorruptionMask({-1}), std::invalid_argument);
    std::vector<std::uint8_t> flags{0, 1, 1, 0, 1};
    CHECK(CorruptionMask::from_flags(flags).indices() == std::vector<std::int32_t>{1, 2, 4});
}

TEST_CASE("sample_theta") {
    CorruptionConfig cfg;
    cfg.theta_min = cfg.theta_max = 5;
    Rng a(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_theta(a, cfg) == 5);

    cfg.theta_min = 5;
    cfg.theta_max = 100;
    Rng rng(2);
    double sum = 0;
    std::int32_t lo = 1000, hi = 0;
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) {
        const std::int32_t t = sample_theta(rng, cfg);
        sum += t;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    // Uniform on [5, 100] has mean (5 + 100) / 2.
    CHECK(std::abs(sum / kDraws - 52.5) <= 1.0);
    CHECK(lo == 5);
    CHECK(hi == 100);

    Rng x(9), y(9);
    for (int i = 0; i < 50; ++i) CHECK(sample_theta(x, cfg) == sample_theta(y, cfg));
}

TEST_CASE("weighted_shuffle") {
    Rng rng(3);
    std::vector<std::int32_t> one{7};
    CHECK(weighted_shuffle(one, rng) == std::vector<std::size_t>{0});

    constexpr int kDraws = 100000;
    std::vector<std::int32_t> skew{9, 1};
    int first = 0;
    for (int i = 0; i < kDraws; ++i) first += weighted_shuffle(skew, rng)[0] == 0;
    // P(first = heavier) = 9 / (9 + 1).
    CHECK(std::abs(first / double(kDraws) - 0.9) <= 0.01);

    std::vector<std::int32_t> equal{4, 4, 4, 4};
    std::vector<int> counts(4, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[weighted_shuffle(equal, rng)[0]];
    for (int c : counts) CHECK(std::abs(c / double(kDraws) - 0.25) <= 0.01);

    // Second position given the first follows the renormalized weights:
    // P(order = 2,0,1) for weights (1,2,3) is 3/6 * 1/3.
    std::vector<std::int32_t> w{1, 2, 3};
    int hits = 0;
    for (int i = 0; i < kDraws; ++i) hits += weighted_shuffle(w, rng) == std::vector<std::size_t>{2, 0, 1};
    CHECK(std::abs(hits / double(kDraws) - 1.0 / 6.0) <= 0.01);

    std::vector<std::int32_t> zero{1, 0};
    CHECK_THROWS_AS(weighted_shuffle(zero, rng), std::invalid_argument);
}

TEST_CASE("mask_subtree edge quotas") {
    SpanTree t = testing::balanced_tree(16);
    Rng rng(4);
    CHECK(mask_subtree(t, 0, 10, rng).empty());
    CorruptionMask all = mask_subtree(t, 16, 10, rng);
    CHECK(all.size() == 16);
    CHECK_THROWS_AS(mask_subtree(t, 17, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(mask_subtree(t, -1, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(mask_subtree(t, 2, 0, rng), std::invalid_argument);
    // A quota on a subtree stays inside it.
    const NodeIndex right = t.node(0).children[1];
    CorruptionMask part = mask_subtree(t, right, 3, 2, rng);
    CHECK(part.size() == 3);
    CHECK(masked_in(part, 8, 15) == 3);
}

TEST_CASE("mask_subtree apportions 5 tokens as 3 + 2") {
    // Root of 20 tokens with children of 12 and 8; theta 10 sends only the
    // first child into recursion with share 5 * 12 / 20 = 3, and the greedy
    // phase gives the remaining 2 to the small child.
    SpanTree t = span_tree_from_spans(20, {{0, 11}, {12, 19}});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        CorruptionMask m = mask_subtree(t, 5, 10, rng);
        CHECK(m.size() == 5);
        CHECK(masked_in(m, 0, 11) == 3);
        CHECK(masked_in(m, 12, 19) == 2);
    }
}

TEST_CASE("largest remainder breaks ties towards earlier children") {
    // Three large children of 10 under theta 5 with m = 10 of 30: shares of
    // 10/3 each, three floors of 3 and one extra token for the first child.
    SpanTree t = span_tree_from_spans(30, {{0, 9}, {10, 19}, {20, 29}});
    Rng rng(5);
    CorruptionMask m = mask_subtree(t, 10, 5, rng);
    CHECK(masked_in(m, 0, 9) == 4);
    CHECK(masked_in(m, 10, 19) == 3);
    CHECK(masked_in(m, 20, 29) == 3);
}

TEST_CASE("property: exact quota, determinism and subtree completeness") {
    Rng gen(6);
    for (int trial = 0; trial < 500; ++trial) {
        const auto n = static_cast<std::int32_t>(gen.uniform_int(1, 300));
        SpanTree t = testing::random_span_tree(gen, n);
        const auto m = static_cast<std::int32_t>(gen.uniform_int(0, n));
        const auto theta = static_cast<std::int32_t>(gen.uniform_int(1, 120));
        const std::uint64_t seed = gen();
        Rng a(seed), b(seed);
        CorruptionMask ma = mask_subtree(t, m, theta, a);
        CHECK(static_cast<std::int32_t>(ma.size()) == m);
        CHECK(mask_subtree(t, m, theta, b) == ma);
        std::int32_t covered = 0;
        for (NodeIndex i : maximal_masked_subtrees(t, ma)) covered += t.node(i).size();
        CHECK(covered == m);
    }
}

TEST_CASE("maximal_masked_subtrees") {
    SpanTree t = span_tree_from_spans(8, {{0, 3}, {0, 1}, {4, 7}});
    std::vector<NodeIndex> got = maximal_masked_subtrees(t, CorruptionMask({0, 1, 2, 3, 5}));
    REQUIRE(got.size() == 2);
    CHECK(t.node(got[0]).l == 0);
    CHECK(t.node(got[0]).r == 3);
    CHECK(t.node(got[1]).l == 5);
    CHECK(t.node(got[1]).r == 5);
    CHECK(maximal_masked_subtrees(t, CorruptionMask()).empty());
}

TEST_CASE("mask_vanilla quotas") {
    CorruptionConfig cfg;
    cfg.mask_ratio = 0.15;
    Rng rng(7);
    CHECK(mask_vanilla(100, cfg, rng).size() == 15);
    cfg.mask_ratio = 0.25;
    CHECK(mask_vanilla(4, cfg, rng).size() == 1);
    CHECK_THROWS_AS(mask_vanilla(0, cfg, rng), std::invalid_argument);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, 400));
        cfg.mask_ratio = 0.05 + 0.9 * rng.uniform01();
        CHECK(static_cast<std::int32_t>(mask_vanilla(n, cfg, rng).size()) == mask_quota(n, cfg.mask_ratio));
    }
}

TEST_CASE("mask_vanilla span lengths average 5.5") {
    CorruptionConfig cfg;
    Rng rng(8);
    double total = 0;
    double runs = 0;
    for (int trial = 0; trial < 200; ++trial) {
        CorruptionMask m = mask_vanilla(10000, cfg, rng);
        for (const MaskRun& r : m.runs()) {
            total += r.size();
            ++runs;
        }
    }
    // Uniform on [1, 10] has mean 5.5.
    CHECK(std::abs(total / runs - 5.5) <= 0.2);
}

TEST_CASE("encode and decode sentinels") {
    VocabSpec v = VocabSpec::byte_level();
    const TokenId s0 = v.sentinel(0), s1 = v.sentinel(1);
    std::vector<TokenId> ids{5, 6, 7, 8, 9};

    CorruptedExample none = encode_sentinels(ids, CorruptionMask(), v);
    CHECK(none.input_ids == ids);
    CHECK(none.target_ids.empty());
    CHECK(decode_sentinels(none, v) == ids);

    CorruptedExample ex = encode_sentinels(ids, CorruptionMask({1, 2, 4}), v);
    CHECK(ex.input_ids == std::vector<TokenId>{5, s0, 8, s1});
    CHECK(ex.target_ids == std::vector<TokenId>{s0, 6, 7, s1, 9});
    CHECK(decode_sentinels(ex, v) == ids);

    CorruptedExample full = encode_sentinels(ids, CorruptionMask({0, 1, 2, 3, 4}), v);
    CHECK(full.input_ids == std::vector<TokenId>{s0});
    CHECK(decode_sentinels(full, v) == ids);

    CHECK_THROWS_AS(encode_sentinels(ids, CorruptionMask({7}), v), std::invalid_argument);
}

TEST_CASE("decode rejects inconsistent examples") {
    VocabSpec v = VocabSpec::byte_level();
    const TokenId s0 = v.sentinel(0), s1 = v.sentinel(1);
    CHECK_THROWS_AS(decode_sentinels({{5, s0, 8, s1}, {s0, 6, 7}}, v), IntegrityError);
    CHECK_THROWS_AS(decode_sentinels({{5, s0}, {s0, 6, s1, 9}}, v), IntegrityError);
    CHECK_THROWS_AS(decode_sentinels({{5, s1}, {s1, 6}}, v), IntegrityError);
    CHECK_THROWS_AS(decode_sentinels({{5, s0}, {6, s0, 7}}, v), IntegrityError);
    CHECK_THROWS_AS(decode_sentinels({{5, s0}, {s0}}, v), IntegrityError);
    CHECK_THROWS_AS(decode_sentinels({{s1, s0}, {s0, 1, s1, 2}}, v), IntegrityError);
}

TEST_CASE("encode enforces sentinel capacity") {
    VocabSpec v = VocabSpec::byte_level({}, 2);
    std::vector<TokenId> ids = iota_ids(6);
    CHECK_NOTHROW(encode_sentinels(ids, CorruptionMask({0, 2}), v));
    CHECK_THROWS_AS(encode_sentinels(ids, CorruptionMask({0, 2, 4}), v), CapacityError);
}

TEST_CASE("chunk with three masked subtrees") {
    // Three disjoint subtrees fully masked give three sentinels in order.
    SpanTree t = span_tree_from_spans(20, {{2, 4}, {8, 11}, {15, 17}});
    VocabSpec v = VocabSpec::byte_level();
    CorruptionMask mask({2, 3, 4, 8, 9, 10, 11, 15, 16, 17});
    CHECK(maximal_masked_subtrees(t, mask).size() == 3);
    std::vector<TokenId> ids = iota_ids(20, 40);
    CorruptedExample ex = encode_sentinels(ids, mask, v);
    std::vector<TokenId> sentinels;
    for (TokenId id : ex.input_ids)
        if (v.is_sentinel(id)) sentinels.push_back(id);
    CHECK(sentinels == std::vector<TokenId>{v.sentinel(0), v.sentinel(1), v.sentinel(2)});
    CHECK(ex.target_ids == std::vector<TokenId>{v.sentinel(0), 42, 43, 44, v.sentinel(1), 48, 49, 50, 51,
                                                v.sentinel(2), 55, 56, 57});
    CHECK(decode_sentinels(ex, v) == ids);
}

TEST_CASE("property: random round trips") {
    VocabSpec v = VocabSpec::byte_level();
    Rng rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, 300));
        std::vector<TokenId> ids(static_cast<std::size_t>(n));
        for (TokenId& id : ids) id = static_cast<TokenId>(rng.below(256));
        std::vector<std::uint8_t> flags(static_cast<std::size_t>(n));
        for (auto& f : flags) f = rng.below(4) == 0;
        CorruptionMask mask = CorruptionMask::from_flags(flags);
        if (mask.runs().size() > 100) continue;
        CorruptedExample ex = encode_sentinels(ids, mask, v);
        CHECK(ex.input_ids.size() == ids.size() - mask.size() + mask.runs().size());
        CHECK(decode_sentinels(ex, v) == ids);
    }
}
