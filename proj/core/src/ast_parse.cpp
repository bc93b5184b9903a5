#include "astprep/ast_parse.hpp"

#include "astprep/errors.hpp"

#include <algorithm>
#include <numeric>

namespace astprep {

namespace {

constexpr const char* kSyntheticToken = "Token";

SyntaxNode build_from(const std::vector<SyntaxRecord>& records, std::size_t& pos) {
    const SyntaxRecord& rec = records[pos++];
    if (rec.byte_end < rec.byte_start)
        throw ParseError("syntax record '" + rec.kind + "' has end before start");
    SyntaxNode node{rec.kind, {rec.byte_start, rec.byte_end}, {}};
    while (pos < records.size() && records[pos].depth > rec.depth) {
        if (records[pos].depth != rec.depth + 1)
            throw ParseError("syntax record depth jumps from " + std::to_string(rec.depth) + " to " +
                             std::to_string(records[pos].depth));
        SyntaxNode child = build_from(records, pos);
        if (child.span.start < node.span.start || child.span.end > node.span.end)
            throw ParseError("node '" + child.kind + "' escapes parent '" + node.kind + "'");
        if (!node.children.empty() && child.span.start < node.children.back().span.end)
            throw ParseError("sibling nodes '" + node.children.back().kind + "' and '" + child.kind +
                             "' overlap");
        node.children.push_back(std::move(child));
    }
    return node;
}

class Aligner {
public:
    Aligner(const TokenizedFile& tokens) : byte_to_token_(tokens.source.size()) {
        for (std::size_t t = 0; t < tokens.offsets.size(); ++t)
            for (std::size_t b = tokens.offsets[t].start; b < tokens.offsets[t].end; ++b)
                byte_to_token_[b] = static_cast<std::int32_t>(t);
    }

    NodeIndex emit(const SyntaxNode& sn, std::int32_t l, std::int32_t r) {
        const auto self = static_cast<NodeIndex>(nodes_.size());
        nodes_.push_back({sn.kind, l, r, {}, false});
        std::int32_t cursor = l;
        bool any_child = false;
        for (const SyntaxNode& child : sn.children) {
            if (child.span.size() == 0) continue;
            // Earlier siblings keep any token they share with this child.
            std::int32_t cl = std::max(byte_to_token_[child.span.start], cursor);
            std::int32_t cr = std::min(byte_to_token_[child.span.end - 1], r);
            if (cl > cr) continue;
            add_synthetic(self, cursor, cl - 1);
            NodeIndex c = emit(child, cl, cr);
            nodes_[self].children.push_back(c);
            cursor = cr + 1;
            any_child = true;
        }
        if (!any_child && l == r) return self;
        add_synthetic(self, cursor, r);
        return self;
    }

    std::vector<SpanNode> take() { return std::move(nodes_); }

private:
    void add_synthetic(NodeIndex parent, std::int32_t from, std::int32_t to) {
        for (std::int32_t t = from; t <= to; ++t) {
            nodes_[parent].children.push_back(static_cast<NodeIndex>(nodes_.size()));
            nodes_.push_back({kSyntheticToken, t, t, {}, true});
        }
    }

    std::vector<std::int32_t> byte_to_token_;
    std::vector<SpanNode> nodes_;
};

void copy_clipped(const SpanTree& src, NodeIndex from, std::vector<SpanNode>& out, NodeIndex to,
                  std::int32_t begin, std::int32_t end) {
    for (NodeIndex c : src.node(from).children) {
        const SpanNode& child = src.node(c);
        if (child.r < begin || child.l >= end) continue;
        const auto idx = static_cast<NodeIndex>(out.size());
        out.push_back({child.kind, std::max(child.l, begin) - begin, std::min(child.r, end - 1) - begin, {},
                       child.synthetic});
        out[to].children.push_back(idx);
        copy_clipped(src, c, out, idx, begin, end);
    }
}

}  // namespace

SyntaxNode build_syntax_tree(const std::vector<SyntaxRecord>& records) {
    if (records.empty()) throw ParseError("empty syntax record stream");
    std::size_t pos = 0;
    SyntaxNode root = build_from(records, pos);
    if (pos != records.size()) throw ParseError("syntax record stream has more than one root");
    return root;
}

SyntaxTree parse(std::string_view source, Language lang, const ParserBackend& backend, ParseMode mode) {
    if (!backend.supports(lang))
        throw ConfigError("no parser available for language '" + std::string(language_name(lang)) + "'");
    SyntaxTree tree;
    tree.language = lang;
    tree.source_size = source.size();
    try {
        tree.root = build_syntax_tree(backend.parse(lang, source));
        if (tree.root.span.end > source.size()) throw ParseError("syntax tree extends past end of source");
    } catch (const ParseError&) {
        if (mode == ParseMode::Strict) throw;
        tree.root = SyntaxNode{"Unparsed", {0, source.size()}, {}};
        tree.degenerate = true;
    }
    return tree;
}

SpanTree::SpanTree(std::vector<SpanNode> nodes, std::int32_t n, Language language)
    : nodes_(std::move(nodes)), n_(n), language_(language) {}

SpanTree align(const SyntaxTree& tree, const TokenizedFile& tokens) {
    if (tokens.source.size() != tree.source_size)
        throw AlignmentError("syntax tree covers " + std::to_string(tree.source_size) +
                             " bytes but tokens cover " + std::to_string(tokens.source.size()));
    if (tokens.ids.size() != tokens.offsets.size())
        throw AlignmentError("token ids and offsets differ in length");
    if (tree.root.span.end > tree.source_size) throw AlignmentError("syntax tree extends past end of source");
    std::size_t expect = 0;
    for (const ByteRange& off : tokens.offsets) {
        if (off.start != expect || off.end <= off.start)
            throw AlignmentError("token offsets do not tile the source");
        expect = off.end;
    }
    if (expect != tokens.source.size()) throw AlignmentError("token offsets do not cover the source");

    const auto n = static_cast<std::int32_t>(tokens.size());
    if (n == 0) return SpanTree({SpanNode{tree.root.kind, 0, -1, {}, false}}, 0, tree.language);
    Aligner aligner(tokens);
    aligner.emit(tree.root, 0, n - 1);
    return SpanTree(aligner.take(), n, tree.language);
}

SpanTree span_tree_from_spans(std::int32_t n, std::vector<LabeledSpan> spans, Language language) {
    if (n < 0) throw ValidationError("token count must be non-negative");
    for (const auto& s : spans)
        if (s.l < 0 || s.r >= n || s.l > s.r)
            throw ValidationError("span [" + std::to_string(s.l) + ", " + std::to_string(s.r) +
                                  "] outside token range of size " + std::to_string(n));
    if (n == 0) return SpanTree({SpanNode{"Root", 0, -1, {}, true}}, 0, language);

    std::stable_sort(spans.begin(), spans.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
        return a.l != b.l ? a.l < b.l : a.r > b.r;
    });
    bool synthetic_root = spans.empty() || spans.front().l != 0 || spans.front().r != n - 1;
    if (synthetic_root) spans.insert(spans.begin(), LabeledSpan{0, n - 1, "Root"});

    // Nest via a stack of open spans; each token is treated as one byte.
    struct Tmp {
        std::size_t span;
        std::vector<std::size_t> kids;
    };
    std::vector<Tmp> tmp(spans.size());
    std::vector<std::size_t> stack{0};
    tmp[0].span = 0;
    for (std::size_t i = 1; i < spans.size(); ++i) {
        const LabeledSpan& s = spans[i];
        while (spans[stack.back()].r < s.l) stack.pop_back();
        const LabeledSpan& top = spans[stack.back()];
        if (s.r > top.r)
            throw ValidationError("spans [" + std::to_string(top.l) + ", " + std::to_string(top.r) + "] and [" +
                                  std::to_string(s.l) + ", " + std::to_string(s.r) + "] cross");
        tmp[i].span = i;
        tmp[stack.back()].kids.push_back(i);
        stack.push_back(i);
    }
    auto convert = [&](auto&& self, std::size_t i) -> SyntaxNode {
        const LabeledSpan& s = spans[i];
        SyntaxNode node{s.kind, {static_cast<std::size_t>(s.l), static_cast<std::size_t>(s.r) + 1}, {}};
        for (std::size_t k : tmp[i].kids) node.children.push_back(self(self, k));
        return node;
    };
    SyntaxTree syntax{convert(convert, 0), static_cast<std::size_t>(n), language, false};
    TokenizedFile identity;
    identity.source.assign(static_cast<std::size_t>(n), '\0');
    identity.ids.assign(static_cast<std::size_t>(n), 0);
    identity.offsets.resize(static_cast<std::size_t>(n));
    for (std::int32_t t = 0; t < n; ++t) identity.offsets[t] = {static_cast<std::size_t>(t), static_cast<std::size_t>(t) + 1};

    SpanTree tree = align(syntax, identity);
    if (synthetic_root) {
        std::vector<SpanNode> nodes = tree.nodes();
        nodes.front().synthetic = true;
        return SpanTree(std::move(nodes), n, language);
    }
    return tree;
}

std::vector<TokenSpan> subtree_spans(const SpanTree& tree) {
    std::vector<TokenSpan> out;
    for (const SpanNode& node : tree.nodes())
        if (node.size() >= 2) out.push_back(node.span());
    return out;
}

SpanTree restrict_to_chunk(const SpanTree& tree, std::int32_t begin, std::int32_t end) {
    if (begin < 0 || end > tree.token_count() || begin > end)
        throw std::invalid_argument("chunk [" + std::to_string(begin) + ", " + std::to_string(end) +
                                    ") outside tree of " + std::to_string(tree.token_count()) + " tokens");
    std::vector<SpanNode> out{SpanNode{"Chunk", 0, end - begin - 1, {}, true}};
    if (end > begin) copy_clipped(tree, 0, out, 0, begin, end);
    return SpanTree(std::move(out), end - begin, tree.language());
}

void validate(const SpanTree& tree) {
    const auto& nodes = tree.nodes();
    if (nodes.empty()) throw ValidationError("span tree has no root");
    const SpanNode& root = nodes.front();
    if (root.l != 0 || root.r != tree.token_count() - 1)
        throw ValidationError("root does not span all " + std::to_string(tree.token_count()) + " tokens");
    if (tree.token_count() == 0) {
        if (nodes.size() != 1) throw ValidationError("empty tree must consist of a single root");
        return;
    }
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const SpanNode& node = nodes[i];
        auto where = [&] { return "node " + std::to_string(i) + " '" + node.kind + "'"; };
        if (node.l > node.r) throw ValidationError(where() + " covers no tokens");
        if (node.is_leaf()) {
            if (node.l != node.r) throw ValidationError(where() + " is a leaf spanning several tokens");
            continue;
        }
        std::int32_t expect = node.l;
        for (NodeIndex c : node.children) {
            if (c <= static_cast<NodeIndex>(i) || static_cast<std::size_t>(c) >= nodes.size())
                throw ValidationError(where() + " has out-of-order child index");
            if (++parents[c] != 1) throw ValidationError(where() + " shares a child with another node");
            if (nodes[c].l != expect) throw ValidationError(where() + " children do not tile its span");
            expect = nodes[c].r + 1;
        }
        if (expect != node.r + 1) throw ValidationError(where() + " children do not tile its span");
    }
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (parents[i] != 1) throw ValidationError("node " + std::to_string(i) + " is unreachable");
}

}  // namespace astprep
