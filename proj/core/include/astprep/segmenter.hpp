#pragma once

#include "astprep/ast_parse.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace astprep {

/// cost[i] = number of subtree spans [l, r] with l <= i < r, i.e. the breaks
/// caused by a boundary right after 0-based token i. Length n + 1; the last
/// two entries (after the final token, and the forced final boundary) are 0.
struct CostArray {
    std::vector<std::int32_t> cost;

    std::int32_t token_count() const noexcept { return cost.empty() ? 0 : static_cast<std::int32_t>(cost.size()) - 1; }
    /// Breaks caused by a cut that leaves `consumed` tokens before it.
    std::int32_t at_cut(std::int32_t consumed) const { return consumed == 0 ? 0 : cost[consumed - 1]; }
};

CostArray build_cost(const SpanTree& tree);
/// Same accounting from bare spans (for callers without a SpanTree).
CostArray cost_from_spans(std::int32_t n, std::span<const TokenSpan> spans);

struct Chunk {
    std::int32_t begin = 0;  ///< first token
    std::int32_t end = 0;    ///< one past the last token

    std::int32_t size() const noexcept { return end - begin; }
    friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Cuts are token counts: cut c is a boundary after the first c tokens. They
/// strictly increase and the last one equals n (no cuts when n == 0).
struct Segmentation {
    std::vector<std::int32_t> cuts;
    std::int64_t total_breaks = 0;

    std::size_t chunk_count() const noexcept { return cuts.size(); }
    std::vector<Chunk> chunks() const;
    friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

/// Upper bound on the chunk count explored by the DP: min(n, 2 * ceil(n / max_len)).
std::int32_t max_chunk_count(std::int32_t n, std::int32_t max_len);

/// Fixed-size chunks of max_len tokens, last one shorter. total_breaks is left 0.
Segmentation segment_greedy(std::int32_t n, std::int32_t max_len);
/// Greedy chunks scored against `cost`.
Segmentation segment_greedy(const CostArray& cost, std::int32_t max_len);

/// Reference DP scanning the whole window per state, O(n^2).
Segmentation segment_dp_naive(const CostArray& cost, std::int32_t max_len);

/// Called once per DP state by segment_dp with the window minimum it chose.
/// `prev_row[j]` is dp[k - 1][j] (with kUnreachable for infeasible states).
class DpObserver {
public:
    virtual ~DpObserver() = default;
    virtual void on_state(std::int32_t k, std::int32_t i, std::int32_t best_j, std::span<const std::int64_t> prev_row) = 0;
};

inline constexpr std::int64_t kUnreachable = INT64_MAX / 4;

/// Minimum-break segmentation using a monotonic queue for the window minimum,
/// O(n * m) with m = max_chunk_count(n, max_len). Among optimal solutions it
/// returns the fewest chunks, then the earliest last cut, then the earliest
/// cut before it, and so on; segment_dp_naive breaks ties identically.
Segmentation segment_dp(const CostArray& cost, std::int32_t max_len, DpObserver* observer = nullptr);

/// Direct (span, interior cut) incidence count. Throws std::invalid_argument
/// when the segmentation does not partition the tree's tokens.
std::int64_t count_breaks(const SpanTree& tree, const Segmentation& seg);
/// Sum of cost over interior cuts.
std::int64_t score(const CostArray& cost, const Segmentation& seg);

/// Throws std::invalid_argument unless every chunk has 1..max_len tokens and
/// the chunks partition 0..n-1.
void check_feasible(const Segmentation& seg, std::int32_t n, std::int32_t max_len);

struct SegmentStats {
    std::int32_t n = 0;
    std::int32_t k_chosen = 0;
    std::int64_t greedy_breaks = 0;
    std::int64_t dp_breaks = 0;
    std::int64_t dp_runtime_micros = 0;
};

/// Runs greedy and DP segmentation on one file and times the DP.
SegmentStats measure_segmentation(const CostArray& cost, std::int32_t max_len, Segmentation* dp_out = nullptr);

}  // namespace astprep
