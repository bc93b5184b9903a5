#pragma once

#include "astprep/language.hpp"
#include "astprep/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace astprep {

// ---------------------------------------------------------------------------
// Byte-span syntax trees and the parser-backend interface
// ---------------------------------------------------------------------------

/// One node of a backend's pre-order output stream.
struct SyntaxRecord {
    std::string kind;
    std::size_t byte_start = 0;
    std::size_t byte_end = 0;
    int depth = 0;
};

struct SyntaxNode {
    std::string kind;
    ByteRange span;
    std::vector<SyntaxNode> children;
};

struct SyntaxTree {
    SyntaxNode root;
    std::size_t source_size = 0;
    Language language = Language::Toy;
    /// Set when lenient parsing replaced an unparsable file by a single node.
    bool degenerate = false;
};

/// A parser backend turns (language, bytes) into a pre-order record stream.
///
/// Implementations must be safe to call concurrently from several threads or
/// return an independent instance from clone(); the pipeline clones one
/// backend per worker. Unparsable input throws ParseError, an unsupported
/// language throws ConfigError.
class ParserBackend {
public:
    virtual ~ParserBackend() = default;
    virtual bool supports(Language lang) const = 0;
    virtual std::vector<SyntaxRecord> parse(Language lang, std::string_view source) const = 0;
    virtual std::unique_ptr<ParserBackend> clone() const = 0;
};

/// Rebuilds nesting from a pre-order record stream. Throws ParseError when
/// depths jump, children escape their parent, or siblings overlap.
SyntaxNode build_syntax_tree(const std::vector<SyntaxRecord>& records);

enum class ParseMode { Strict, Lenient };

/// Parses one file. In lenient mode an unparsable file yields a single root
/// covering the whole source with `degenerate` set; an unsupported language is
/// a ConfigError in both modes.
SyntaxTree parse(std::string_view source, Language lang, const ParserBackend& backend,
                 ParseMode mode = ParseMode::Strict);

// ---------------------------------------------------------------------------
// Token-aligned span trees
// ---------------------------------------------------------------------------

using NodeIndex = std::int32_t;

struct TokenSpan {
    std::int32_t l = 0;
    std::int32_t r = -1;

    std::int32_t size() const noexcept { return r - l + 1; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Node with an inclusive token span [l, r]. Synthetic nodes wrap tokens that
/// the syntax tree owns directly (keywords, delimiters, whitespace) or that a
/// multi-token lexical leaf splits into.
struct SpanNode {
    std::string kind;
    std::int32_t l = 0;
    std::int32_t r = -1;
    std::vector<NodeIndex> children;
    bool synthetic = false;

    std::int32_t size() const noexcept { return r - l + 1; }
    bool is_leaf() const noexcept { return children.empty(); }
    TokenSpan span() const noexcept { return {l, r}; }
};

/// Arena of SpanNodes in pre-order; node 0 is the root spanning [0, n-1].
class SpanTree {
public:
    SpanTree() = default;
    SpanTree(std::vector<SpanNode> nodes, std::int32_t n, Language language);

    const SpanNode& root() const { return nodes_.front(); }
    const SpanNode& node(NodeIndex i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const std::vector<SpanNode>& nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::int32_t token_count() const noexcept { return n_; }
    Language language() const noexcept { return language_; }

private:
    std::vector<SpanNode> nodes_;
    std::int32_t n_ = 0;
    Language language_ = Language::Toy;
};

/// Maps byte spans onto minimal covering token ranges. A token shared by two
/// siblings stays with the earlier one; uncovered tokens become synthetic
/// leaves. Throws AlignmentError when tree and tokens disagree on the source.
SpanTree align(const SyntaxTree& tree, const TokenizedFile& tokens);

struct LabeledSpan {
    std::int32_t l = 0;
    std::int32_t r = 0;
    std::string kind = "Node";
};

/// Builds a SpanTree over n tokens from a laminar family of spans (any two are
/// nested or disjoint). Missing root and leaf tokens are synthesized. Throws
/// ValidationError on crossing or out-of-range spans.
SpanTree span_tree_from_spans(std::int32_t n, std::vector<LabeledSpan> spans,
                              Language language = Language::Toy);

/// Spans of every node with size >= 2, in pre-order.
std::vector<TokenSpan> subtree_spans(const SpanTree& tree);

/// Tokens [begin, end) of `tree` as their own tree: nodes are clipped to the
/// chunk and hung under a synthetic "Chunk" root, indices rebased to 0.
SpanTree restrict_to_chunk(const SpanTree& tree, std::int32_t begin, std::int32_t end);

/// Throws ValidationError naming the first violated structural invariant.
void validate(const SpanTree& tree);

}  // namespace astprep
