#include "astprep/corruptor.hpp"

#include "astprep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace astprep {

namespace {

constexpr int kVanillaRetries = 16;

class SubtreeMasker {
public:
    SubtreeMasker(const SpanTree& tree, std::int32_t theta, Rng& rng)
        : tree_(tree), theta_(theta), rng_(rng), flags_(static_cast<std::size_t>(tree.token_count()), 0) {}

    void run(NodeIndex t, std::int32_t m) {
        const SpanNode& node = tree_.node(t);
        if (m < 0 || m > node.size())
            throw std::invalid_argument("mask quota " + std::to_string(m) + " outside [0, " +
                                        std::to_string(node.size()) + "]");
        if (m == 0) return;
        if (m == node.size()) {
            std::fill(flags_.begin() + node.l, flags_.begin() + node.r + 1, std::uint8_t{1});
            return;
        }

        std::vector<NodeIndex> large;
        std::vector<NodeIndex> small;
        std::int64_t large_tokens = 0;
        for (NodeIndex c : node.children) {
            if (tree_.node(c).size() > theta_) {
                large.push_back(c);
                large_tokens += tree_.node(c).size();
            } else {
                small.push_back(c);
            }
        }

        // Largest-remainder apportionment of floor(m * large_tokens / size)
        // among the large children, each share ideally m * child / size.
        const std::int64_t total = node.size();
        std::int32_t remaining = m;
        if (!large.empty()) {
            const auto target = static_cast<std::int32_t>(m * large_tokens / total);
            std::vector<std::int32_t> share(large.size());
            std::vector<std::int64_t> remainder(large.size());
            std::int32_t assigned = 0;
            for (std::size_t k = 0; k < large.size(); ++k) {
                const std::int64_t scaled = static_cast<std::int64_t>(m) * tree_.node(large[k]).size();
                share[k] = static_cast<std::int32_t>(scaled / total);
                remainder[k] = scaled % total;
                assigned += share[k];
            }
            std::vector<std::size_t> order(large.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
            for (std::int32_t extra = target - assigned, k = 0; extra > 0; --extra, ++k) ++share[order[k]];
            for (std::size_t k = 0; k < large.size(); ++k) run(large[k], share[k]);
            remaining -= target;
        }

        if (remaining == 0) return;
        for (NodeIndex c : weighted_shuffle(tree_, small, rng_)) {
            const std::int32_t take = std::min(remaining, tree_.node(c).size());
            run(c, take);
            remaining -= take;
            if (remaining == 0) break;
        }
        if (remaining != 0) throw std::logic_error("subtree masking left quota unassigned");
    }

    CorruptionMask finish() const { return CorruptionMask::from_flags(flags_); }

private:
    const SpanTree& tree_;
    std::int32_t theta_;
    Rng& rng_;
    std::vector<std::uint8_t> flags_;
};

}  // namespace

void CorruptionConfig::validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
        throw ConfigError("mask ratio must lie in (0, 1), got " + std::to_string(mask_ratio));
    if (theta_min < 1 || theta_min > theta_max)
        throw ConfigError("theta bounds must satisfy 1 <= min <= max, got [" + std::to_string(theta_min) + ", " +
                          std::to_string(theta_max) + "]");
    if (text_span_min < 1 || text_span_min > text_span_max)
        throw ConfigError("text span bounds must satisfy 1 <= min <= max, got [" + std::to_string(text_span_min) +
                          ", " + std::to_string(text_span_max) + "]");
}

std::int32_t mask_quota(std::int32_t n, double ratio) {
    if (n <= 0) return 0;
    const long double exact = static_cast<long double>(n) * ratio;
    return std::clamp(static_cast<std::int32_t>(std::floor(exact + 1e-9L)), 0, n);
}

CorruptionMask::CorruptionMask(std::vector<std::int32_t> indices) : indices_(std::move(indices)) {
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        if (indices_[k] < 0 || (k > 0 && indices_[k] <= indices_[k - 1]))
            throw std::invalid_argument("mask indices must be non-negative and strictly increasing");
    }
}

CorruptionMask CorruptionMask::from_flags(std::span<const std::uint8_t> flags) {
    std::vector<std::int32_t> idx;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) idx.push_back(static_cast<std::int32_t>(i));
    CorruptionMask mask;
    mask.indices_ = std::move(idx);
    return mask;
}

bool CorruptionMask::contains(std::int32_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::vector<MaskRun> CorruptionMask::runs() const {
    std::vector<MaskRun> out;
    for (std::int32_t i : indices_) {
        if (!out.empty() && out.back().end == i)
            ++out.back().end;
        else
            out.push_back({i, i + 1});
    }
    return out;
}

std::int32_t sample_theta(Rng& rng, const CorruptionConfig& cfg) {
    return static_cast<std::int32_t>(rng.uniform_int(cfg.theta_min, cfg.theta_max));
}

std::vector<std::size_t> weighted_shuffle(std::span<const std::int32_t> weights, Rng& rng) {
    // Efraimidis-Spirakis: sorting by u^(1/w) descending samples successive
    // weighted draws without replacement.
    std::vector<double> key(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0) throw std::invalid_argument("weighted_shuffle weights must be positive");
        key[k] = std::log(rng.uniform01()) / weights[k];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return order;
}

std::vector<NodeIndex> weighted_shuffle(const SpanTree& tree, std::span<const NodeIndex> children, Rng& rng) {
    std::vector<std::int32_t> weights;
    weights.reserve(children.size());
    for (NodeIndex c : children) weights.push_back(tree.node(c).size());
    std::vector<NodeIndex> out;
    out.reserve(children.size());
    for (std::size_t k : weighted_shuffle(weights, rng)) out.push_back(children[k]);
    return out;
}

CorruptionMask mask_subtree(const SpanTree& tree, NodeIndex node, std::int32_t quota, std::int32_t theta, Rng& rng) {
    if (node < 0 || static_cast<std::size_t>(node) >= tree.node_count())
        throw std::invalid_argument("node index out of range");
    if (theta < 1) throw std::invalid_argument("theta must be at least 1");
    SubtreeMasker masker(tree, theta, rng);
    masker.run(node, quota);
    return masker.finish();
}

CorruptionMask mask_vanilla(std::int32_t n, const CorruptionConfig& cfg, Rng& rng) {
    if (n < 1) throw std::invalid_argument("mask_vanilla needs at least one token");
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
    auto free_range = [&](std::int32_t a, std::int32_t b) {  // [a, b) plus one token of margin
        for (std::int32_t i = std::max(0, a - 1); i < std::min(n, b + 1); ++i)
            if (flags[i]) return false;
        return true;
    };

    std::int32_t remaining = mask_quota(n, cfg.mask_ratio);
    while (remaining > 0) {
        const auto len = static_cast<std::int32_t>(
            std::min<std::int64_t>(rng.uniform_int(cfg.text_span_min, cfg.text_span_max), remaining));
        std::int32_t start = 0;
        bool placed = false;
        for (int attempt = 0; attempt < kVanillaRetries && !placed; ++attempt) {
            start = static_cast<std::int32_t>(rng.uniform_int(0, n - len));
            placed = free_range(start, start + len);
        }
        if (placed) {
            std::fill(flags.begin() + start, flags.begin() + start + len, std::uint8_t{1});
            remaining -= len;
            continue;
        }
        // Nearest unmasked token to the last drawn start, extended rightwards.
        std::int32_t p = -1;
        for (std::int32_t d = 0; p < 0; ++d) {
            if (start + d < n && !flags[start + d]) p = start + d;
            else if (start - d >= 0 && !flags[start - d]) p = start - d;
        }
        std::int32_t taken = 0;
        for (std::int32_t i = p; i < n && !flags[i] && taken < len; ++i, ++taken) flags[i] = 1;
        remaining -= taken;
    }
    return CorruptionMask::from_flags(flags);
}

CorruptedExample encode_sentinels(std::span<const TokenId> ids, const CorruptionMask& mask, const VocabSpec& vocab) {
    const std::vector<MaskRun> runs = mask.runs();
    if (runs.size() > static_cast<std::size_t>(vocab.sentinel_count()))
        throw CapacityError(std::to_string(runs.size()) + " masked runs exceed " +
                            std::to_string(vocab.sentinel_count()) + " sentinel ids");
    if (!runs.empty() && static_cast<std::size_t>(runs.back().end) > ids.size())
        throw std::invalid_argument("mask index outside chunk of " + std::to_string(ids.size()) + " tokens");

    CorruptedExample ex;
    ex.input_ids.reserve(ids.size() - mask.size() + runs.size());
    ex.target_ids.reserve(mask.size() + runs.size());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const TokenId sentinel = vocab.sentinel(static_cast<int>(k));
        ex.input_ids.insert(ex.input_ids.end(), ids.begin() + pos, ids.begin() + runs[k].begin);
        ex.input_ids.push_back(sentinel);
        ex.target_ids.push_back(sentinel);
        ex.target_ids.insert(ex.target_ids.end(), ids.begin() + runs[k].begin, ids.begin() + runs[k].end);
        pos = static_cast<std::size_t>(runs[k].end);
    }
    ex.input_ids.insert(ex.input_ids.end(), ids.begin() + pos, ids.end());
    return ex;
}

std::vector<TokenId> decode_sentinels(const CorruptedExample& example, const VocabSpec& vocab) {
    // Split the target into (sentinel, span) segments.
    std::vector<std::pair<std::size_t, std::size_t>> segments;
    const auto& target = example.target_ids;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (vocab.is_sentinel(target[i])) {
            if (vocab.sentinel_index(target[i]) != static_cast<int>(segments.size()))
                throw IntegrityError("target sentinel " + std::to_string(vocab.sentinel_index(target[i])) +
                                     " out of order, expected " + std::to_string(segments.size()));
            segments.push_back({i + 1, i + 1});
        } else {
            if (segments.empty()) throw IntegrityError("target does not start with a sentinel");
            segments.back().second = i + 1;
        }
    }
    for (std::size_t k = 0; k < segments.size(); ++k)
        if (segments[k].first == segments[k].second)
            throw IntegrityError("target span for sentinel " + std::to_string(k) + " is empty");

    std::vector<TokenId> out;
    out.reserve(example.input_ids.size() + target.size());
    std::size_t next = 0;
    for (TokenId id : example.input_ids) {
        if (!vocab.is_sentinel(id)) {
            out.push_back(id);
            continue;
        }
        if (vocab.sentinel_index(id) != static_cast<int>(next))
            throw IntegrityError("input sentinel " + std::to_string(vocab.sentinel_index(id)) + " out of order");
        if (next >= segments.size())
            throw IntegrityError("input sentinel " + std::to_string(next) + " missing from target");
        out.insert(out.end(), target.begin() + segments[next].first, target.begin() + segments[next].second);
        ++next;
    }
    if (next != segments.size())
        throw IntegrityError("target has " + std::to_string(segments.size()) + " sentinels but input has " +
                             std::to_string(next));
    return out;
}

std::vector<NodeIndex> maximal_masked_subtrees(const SpanTree& tree, const CorruptionMask& mask) {
    const std::int32_t n = tree.token_count();
    std::vector<std::int32_t> prefix(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
    for (std::int32_t i : mask.indices())
        if (i < n) flags[i] = 1;
    for (std::int32_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + flags[i];
    auto full = [&](const SpanNode& s) { return s.size() > 0 && prefix[s.r + 1] - prefix[s.l] == s.size(); };

    std::vector<NodeIndex> out;
    std::vector<NodeIndex> stack{0};
    while (!stack.empty()) {
        NodeIndex t = stack.back();
        stack.pop_back();
        const SpanNode& node = tree.node(t);
        if (full(node)) {
            out.push_back(t);
            continue;
        }
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

}  // namespace astprep
