#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace astprep {

using TokenId = std::int32_t;

inline constexpr int kDefaultSentinelCount = 100;

/// Half-open byte interval [start, end) into a source buffer.
struct ByteRange {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct MergeRule {
    std::string left;
    std::string right;
    friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

/// Immutable byte-level BPE vocabulary.
///
/// Content ids are dense in [0, content_size()). Sentinel ids occupy
/// [sentinel_base_id(), sentinel_base_id() + sentinel_count()) directly above
/// the content ids. Every single byte must be a token so that tokenization is
/// total, and every merge rule must produce a token that exists in the map.
class VocabSpec {
public:
    /// Builds and validates a vocabulary from explicit (token, id) entries.
    /// Throws ValidationError on duplicates, gaps, missing bytes or unusable merges.
    static VocabSpec from_entries(std::vector<std::pair<std::string, TokenId>> entries,
                                  std::vector<MergeRule> merges,
                                  int sentinel_count = kDefaultSentinelCount);

    /// Byte vocabulary (ids 0..255 are the bytes) extended by the products of
    /// `merges` in rule order.
    static VocabSpec byte_level(std::vector<MergeRule> merges = {},
                                int sentinel_count = kDefaultSentinelCount);

    std::size_t content_size() const noexcept { return id_to_token_.size(); }
    std::size_t total_size() const noexcept { return content_size() + sentinel_count_; }

    TokenId sentinel_base_id() const noexcept { return static_cast<TokenId>(content_size()); }
    int sentinel_count() const noexcept { return sentinel_count_; }
    TokenId sentinel(int index) const;
    bool is_sentinel(TokenId id) const noexcept {
        return id >= sentinel_base_id() && id < sentinel_base_id() + sentinel_count_;
    }
    /// Index of a sentinel id within the reserved block.
    int sentinel_index(TokenId id) const noexcept { return id - sentinel_base_id(); }

    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token_bytes(TokenId id) const;
    TokenId byte_id(unsigned char byte) const noexcept { return byte_ids_[byte]; }

    const std::vector<MergeRule>& merges() const noexcept { return merges_; }

    struct MergeResult {
        std::uint32_t rank;
        TokenId merged;
    };
    std::optional<MergeResult> lookup_merge(TokenId left, TokenId right) const;

private:
    VocabSpec() = default;
    void index_merges();

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<MergeRule> merges_;
    std::unordered_map<std::uint64_t, MergeResult> merge_table_;
    std::array<TokenId, 256> byte_ids_{};
    int sentinel_count_ = kDefaultSentinelCount;
};

/// Loads "vocab.tsv" and "merges.txt" from a directory, or a token-map file
/// with a sibling "merges.txt".
VocabSpec load_vocab(const std::filesystem::path& path, int sentinel_count = kDefaultSentinelCount);
VocabSpec load_vocab(const std::filesystem::path& token_map, const std::filesystem::path& merges,
                     int sentinel_count = kDefaultSentinelCount);

/// Writes the token map and merge list in the format load_vocab reads.
void save_vocab(const VocabSpec& vocab, const std::filesystem::path& directory);

/// Escapes bytes outside printable ASCII (and backslash) as \xNN.
std::string escape_token(std::string_view raw);
/// Inverse of escape_token; also accepts "\\" for a backslash. Throws ParseError.
std::string unescape_token(std::string_view escaped, std::size_t line = 0);

struct TokenizedFile {
    std::vector<TokenId> ids;
    std::vector<ByteRange> offsets;
    std::string source;

    std::size_t size() const noexcept { return ids.size(); }
    bool empty() const noexcept { return ids.empty(); }
};

/// Splits source into pre-tokenization pieces (GPT-2 style word, number,
/// punctuation and whitespace groups). Pieces tile the input.
std::vector<ByteRange> pretokenize(std::string_view source);

/// Byte-level BPE with exact byte offsets. Total and deterministic.
TokenizedFile tokenize(const VocabSpec& vocab, std::string_view source);

/// Concatenated bytes of content ids. Throws std::out_of_range on sentinel or
/// unknown ids.
std::string detokenize(const VocabSpec& vocab, std::span<const TokenId> ids);

}  // namespace astprep
