#include "astprep/segmenter.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

namespace astprep {

namespace {

void require_capacity(std::int32_t max_len) {
    if (max_len < 1) throw std::invalid_argument("max_len must be at least 1, got " + std::to_string(max_len));
}

// Indices whose values are non-decreasing from front to back, so the front is
// the window minimum. One row pushes each index at most once, so a linear
// buffer of n slots never wraps.
class MonotonicQueue {
public:
    explicit MonotonicQueue(std::size_t pushes) : buf_(pushes) {}

    void clear() noexcept { head_ = tail_ = 0; }
    bool empty() const noexcept { return head_ == tail_; }
    std::int32_t front() const noexcept { return buf_[head_]; }
    std::int32_t back() const noexcept { return buf_[tail_ - 1]; }
    void pop_front() noexcept { ++head_; }
    void pop_back() noexcept { --tail_; }
    void push_back(std::int32_t v) noexcept { buf_[tail_++] = v; }

private:
    std::vector<std::int32_t> buf_;
    std::size_t head_ = 0;
    std::size_t tail_ = 0;
};

// Back-pointers are stored as the length of the last chunk (1..max_len), which
// fits 16 bits for every practical max_len.
template <typename Offset>
class BackPointers {
public:
    BackPointers(std::int32_t rows, std::int32_t n) : width_(static_cast<std::size_t>(n) + 1), data_(rows * width_) {}
    void set(std::int32_t k, std::int32_t i, std::int32_t len) {
        data_[(k - 1) * width_ + i] = static_cast<Offset>(len);
    }
    std::int32_t get(std::int32_t k, std::int32_t i) const { return data_[(k - 1) * width_ + i]; }

private:
    std::size_t width_;
    std::vector<Offset> data_;
};

std::int64_t add_cost(std::int64_t base, std::int32_t c) { return base >= kUnreachable ? kUnreachable : base + c; }

template <typename Offset, bool Naive>
Segmentation run_dp(const CostArray& cost, std::int32_t max_len, DpObserver* observer) {
    const std::int32_t n = cost.token_count();
    const std::int32_t m = max_chunk_count(n, max_len);
    const std::int32_t k_lo = (n + max_len - 1) / max_len;

    // Rows are indexed by i = tokens consumed; the cut after i tokens costs
    // cost[i - 1].
    std::vector<std::int64_t> prev(static_cast<std::size_t>(n) + 1, kUnreachable);
    std::vector<std::int64_t> cur(static_cast<std::size_t>(n) + 1, kUnreachable);
    prev[0] = 0;
    BackPointers<Offset> back(m, n);
    std::vector<std::int64_t> final_cost(static_cast<std::size_t>(m) + 1, kUnreachable);
    MonotonicQueue queue(static_cast<std::size_t>(n));

    for (std::int32_t k = 1; k <= m; ++k) {
        cur[0] = kUnreachable;
        queue.clear();
        for (std::int32_t i = 1; i <= n; ++i) {
            std::int32_t best;
            if constexpr (Naive) {
                best = std::max(0, i - max_len);
                for (std::int32_t j = best + 1; j < i; ++j)
                    if (prev[j] < prev[best]) best = j;
            } else {
                while (!queue.empty() && queue.front() < i - max_len) queue.pop_front();
                // Strict comparison keeps the earliest j among equal values.
                while (!queue.empty() && prev[queue.back()] > prev[i - 1]) queue.pop_back();
                queue.push_back(i - 1);
                best = queue.front();
            }
            if (observer) observer->on_state(k, i, best, prev);
            back.set(k, i, i - best);
            cur[i] = add_cost(prev[best], cost.cost[i - 1]);
        }
        final_cost[k] = cur[n];
        std::swap(prev, cur);
    }

    std::int32_t k_best = k_lo;
    for (std::int32_t k = k_lo + 1; k <= m; ++k)
        if (final_cost[k] < final_cost[k_best]) k_best = k;

    Segmentation seg;
    seg.total_breaks = final_cost[k_best];
    seg.cuts.resize(static_cast<std::size_t>(k_best));
    std::int32_t i = n;
    for (std::int32_t k = k_best; k >= 1; --k) {
        seg.cuts[k - 1] = i;
        i -= back.get(k, i);
    }
    if (i != 0 || seg.total_breaks >= kUnreachable) throw std::logic_error("segmentation DP failed to reconstruct");
    return seg;
}

template <bool Naive>
Segmentation dispatch_dp(const CostArray& cost, std::int32_t max_len, DpObserver* observer) {
    require_capacity(max_len);
    if (cost.token_count() == 0) return {};
    if (max_len <= 0xFFFF) return run_dp<std::uint16_t, Naive>(cost, max_len, observer);
    return run_dp<std::uint32_t, Naive>(cost, max_len, observer);
}

}  // namespace

CostArray build_cost(const SpanTree& tree) {
    const std::int32_t n = tree.token_count();
    std::vector<std::int32_t> diff(static_cast<std::size_t>(n) + 1, 0);
    for (const SpanNode& node : tree.nodes()) {
        if (node.size() < 2) continue;
        ++diff[node.l];
        --diff[node.r];
    }
    CostArray out;
    out.cost.assign(static_cast<std::size_t>(n) + 1, 0);
    std::int32_t running = 0;
    for (std::int32_t i = 0; i < n; ++i) {
        running += diff[i];
        out.cost[i] = running;
    }
    return out;
}

CostArray cost_from_spans(std::int32_t n, std::span<const TokenSpan> spans) {
    if (n < 0) throw std::invalid_argument("token count must be non-negative");
    std::vector<std::int32_t> diff(static_cast<std::size_t>(n) + 1, 0);
    for (TokenSpan s : spans) {
        if (s.l < 0 || s.r >= n || s.l > s.r) throw std::invalid_argument("span outside token range");
        if (s.size() < 2) continue;
        ++diff[s.l];
        --diff[s.r];
    }
    CostArray out;
    out.cost.assign(static_cast<std::size_t>(n) + 1, 0);
    std::int32_t running = 0;
    for (std::int32_t i = 0; i < n; ++i) out.cost[i] = running += diff[i];
    return out;
}

std::vector<Chunk> Segmentation::chunks() const {
    std::vector<Chunk> out;
    out.reserve(cuts.size());
    std::int32_t begin = 0;
    for (std::int32_t c : cuts) {
        out.push_back({begin, c});
        begin = c;
    }
    return out;
}

std::int32_t max_chunk_count(std::int32_t n, std::int32_t max_len) {
    require_capacity(max_len);
    if (n <= 0) return 0;
    // In an optimal partition any two neighbouring chunks can be merged unless
    // together they exceed max_len, so 2 * ceil(n / max_len) chunks suffice.
    const std::int64_t k_lo = (static_cast<std::int64_t>(n) + max_len - 1) / max_len;
    return static_cast<std::int32_t>(std::min<std::int64_t>(n, 2 * k_lo));
}

Segmentation segment_greedy(std::int32_t n, std::int32_t max_len) {
    require_capacity(max_len);
    Segmentation seg;
    for (std::int64_t c = max_len; c < n; c += max_len) seg.cuts.push_back(static_cast<std::int32_t>(c));
    if (n > 0) seg.cuts.push_back(n);
    return seg;
}

Segmentation segment_greedy(const CostArray& cost, std::int32_t max_len) {
    Segmentation seg = segment_greedy(cost.token_count(), max_len);
    seg.total_breaks = score(cost, seg);
    return seg;
}

Segmentation segment_dp_naive(const CostArray& cost, std::int32_t max_len) {
    return dispatch_dp<true>(cost, max_len, nullptr);
}

Segmentation segment_dp(const CostArray& cost, std::int32_t max_len, DpObserver* observer) {
    return dispatch_dp<false>(cost, max_len, observer);
}

std::int64_t count_breaks(const SpanTree& tree, const Segmentation& seg) {
    const std::int32_t n = tree.token_count();
    if ((n == 0 && !seg.cuts.empty()) || (n > 0 && (seg.cuts.empty() || seg.cuts.back() != n)))
        throw std::invalid_argument("segmentation does not cover " + std::to_string(n) + " tokens");
    std::vector<std::int32_t> interior(seg.cuts.begin(), seg.cuts.end());
    if (!interior.empty()) interior.pop_back();
    std::int64_t breaks = 0;
    for (const SpanNode& node : tree.nodes()) {
        if (node.size() < 2) continue;
        // A cut c falls strictly inside [l, r] when l < c <= r.
        auto lo = std::upper_bound(interior.begin(), interior.end(), node.l);
        auto hi = std::upper_bound(interior.begin(), interior.end(), node.r);
        breaks += hi - lo;
    }
    return breaks;
}

std::int64_t score(const CostArray& cost, const Segmentation& seg) {
    std::int64_t total = 0;
    for (std::size_t k = 0; k + 1 < seg.cuts.size(); ++k) total += cost.at_cut(seg.cuts[k]);
    return total;
}

void check_feasible(const Segmentation& seg, std::int32_t n, std::int32_t max_len) {
    if (n == 0) {
        if (!seg.cuts.empty()) throw std::invalid_argument("empty input must have no chunks");
        return;
    }
    if (seg.cuts.empty() || seg.cuts.back() != n)
        throw std::invalid_argument("last cut must equal n = " + std::to_string(n));
    std::int32_t begin = 0;
    for (std::int32_t c : seg.cuts) {
        if (c - begin < 1 || c - begin > max_len)
            throw std::invalid_argument("chunk [" + std::to_string(begin) + ", " + std::to_string(c) +
                                        ") has length outside [1, " + std::to_string(max_len) + "]");
        begin = c;
    }
}

SegmentStats measure_segmentation(const CostArray& cost, std::int32_t max_len, Segmentation* dp_out) {
    SegmentStats stats;
    stats.n = cost.token_count();
    stats.greedy_breaks = segment_greedy(cost, max_len).total_breaks;
    auto t0 = std::chrono::steady_clock::now();
    Segmentation dp = segment_dp(cost, max_len);
    auto t1 = std::chrono::steady_clock::now();
    stats.dp_runtime_micros = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
    stats.dp_breaks = dp.total_breaks;
    stats.k_chosen = static_cast<std::int32_t>(dp.chunk_count());
    if (dp_out) *dp_out = std::move(dp);
    return stats;
}

}  // namespace astprep
