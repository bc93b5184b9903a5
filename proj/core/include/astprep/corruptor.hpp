#pragma once

#include "astprep/ast_parse.hpp"
#include "astprep/rng.hpp"
#include "astprep/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace astprep {

enum class CorruptionMode { Subtree, Vanilla };

struct CorruptionConfig {
    double mask_ratio = 0.25;
    std::int32_t theta_min = 5;
    std::int32_t theta_max = 100;
    std::int32_t text_span_min = 1;
    std::int32_t text_span_max = 10;
    CorruptionMode mode = CorruptionMode::Subtree;

    /// Throws ConfigError when a bound is out of range.
    void validate() const;
};

/// floor(n * ratio), robust to the representation error of decimal ratios
/// (so 29 % of 100 is 29, not 28).
std::int32_t mask_quota(std::int32_t n, double ratio);

struct MaskRun {
    std::int32_t begin = 0;
    std::int32_t end = 0;  ///< exclusive

    std::int32_t size() const noexcept { return end - begin; }
    friend bool operator==(const MaskRun&, const MaskRun&) = default;
};

/// Sorted set of masked token indices within one chunk.
class CorruptionMask {
public:
    CorruptionMask() = default;
    /// Throws std::invalid_argument unless strictly increasing and non-negative.
    explicit CorruptionMask(std::vector<std::int32_t> indices);
    static CorruptionMask from_flags(std::span<const std::uint8_t> flags);

    const std::vector<std::int32_t>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(std::int32_t i) const;
    /// Maximal runs of consecutive indices.
    std::vector<MaskRun> runs() const;

    friend bool operator==(const CorruptionMask&, const CorruptionMask&) = default;

private:
    std::vector<std::int32_t> indices_;
};

/// Uniform on [theta_min, theta_max].
std::int32_t sample_theta(Rng& rng, const CorruptionConfig& cfg);

/// Permutation of 0..weights.size()-1 distributed as successive draws without
/// replacement with probability proportional to weight (all weights > 0).
std::vector<std::size_t> weighted_shuffle(std::span<const std::int32_t> weights, Rng& rng);
/// Children reordered with weight = subtree size.
std::vector<NodeIndex> weighted_shuffle(const SpanTree& tree, std::span<const NodeIndex> children, Rng& rng);

/// Masks exactly `quota` tokens of subtree `node`.
///
/// Children larger than theta receive a share of the quota proportional to
/// their size (integers apportioned by largest remainder) and recurse; the
/// rest of the quota goes greedily to the remaining children in weighted
/// shuffled order. Throws std::invalid_argument unless 0 <= quota <= size.
CorruptionMask mask_subtree(const SpanTree& tree, NodeIndex node, std::int32_t quota, std::int32_t theta, Rng& rng);
inline CorruptionMask mask_subtree(const SpanTree& tree, std::int32_t quota, std::int32_t theta, Rng& rng) {
    return mask_subtree(tree, 0, quota, theta, rng);
}

/// Random spans with length uniform on [text_span_min, text_span_max] until
/// mask_quota(n, mask_ratio) tokens are masked; the final span is truncated.
/// Spans keep a gap of one unmasked token where the free space allows it.
CorruptionMask mask_vanilla(std::int32_t n, const CorruptionConfig& cfg, Rng& rng);

struct CorruptedExample {
    std::vector<TokenId> input_ids;
    std::vector<TokenId> target_ids;
    friend bool operator==(const CorruptedExample&, const CorruptedExample&) = default;
};

/// Replaces every maximal run by one sentinel (numbered from 0 per example)
/// and emits the runs after their sentinels in the target. Throws
/// CapacityError when there are more runs than sentinel ids.
CorruptedExample encode_sentinels(std::span<const TokenId> ids, const CorruptionMask& mask, const VocabSpec& vocab);

/// Inverse of encode_sentinels. Throws IntegrityError on inconsistent sentinels.
std::vector<TokenId> decode_sentinels(const CorruptedExample& example, const VocabSpec& vocab);

/// Fully masked nodes whose parent is not fully masked, in pre-order.
std::vector<NodeIndex> maximal_masked_subtrees(const SpanTree& tree, const CorruptionMask& mask);

}  // namespace astprep
