#include "astprep/ast_parse.hpp"
#include "astprep/errors.hpp"
#include "astprep/tokenizer.hpp"
#include "astprep/toy_language.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <functional>
#include <set>
#include <tuple>

using namespace astprep;

namespace {

const SyntaxNode* find_kind(const SyntaxNode& n, std::string_view kind) {
    if (n.kind == kind) return &n;
    for (const SyntaxNode& c : n.children)
        if (const SyntaxNode* hit = find_kind(c, kind)) return hit;
    return nullptr;
}

std::vector<std::string> child_kinds(const SyntaxNode& n) {
    std::vector<std::string> out;
    for (const SyntaxNode& c : n.children) out.push_back(c.kind);
    return out;
}

// Leaf frontier of a span tree, left to right.
std::vector<std::int32_t> frontier(const SpanTree& t) {
    std::vector<std::int32_t> out;
    std::function<void(NodeIndex)> walk = [&](NodeIndex i) {
        const SpanNode& n = t.node(i);
        if (n.children.empty()) {
            for (std::int32_t k = n.l; k <= n.r; ++k) out.push_back(k);
            return;
        }
        for (NodeIndex c : n.children) walk(c);
    };
    if (t.node_count()) walk(0);
    return out;
}

std::vector<std::int32_t> iota_vec(std::int32_t n) {
    std::vector<std::int32_t> v(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

const char* const kFactorial =
    "def factorial(n):\n"
    "    if n == 0:\n"
    "        return 1\n"
    "    else:\n"
    "        return n * factorial(n - 1)\n";

const char* const kTwoMethods =
    "class Stack:\n"
    "    def push(self, item):\n"
    "        self.items = self.items + [item]\n"
    "    def drain(self):\n"
    "        while self.items:\n"
    "            if len(self.items) > 1:\n"
    "                pass\n"
    "            self.items = self.items[1]\n";

}  // namespace

TEST_CASE("toy parser: single function") {
    std::string src = "def f():\n    return 1\n";
    SyntaxNode root = parse_toy(src);
    CHECK(root.kind == "Module");
    const SyntaxNode* fn = find_kind(root, "FuncDef");
    REQUIRE(fn);
    CHECK(fn->span.start == 0);
    // The definition ends with its last statement; the final newline is trivia.
    CHECK(src.substr(fn->span.start, fn->span.size()) == "def f():\n    return 1");
}

TEST_CASE("toy parser: class with two methods, While holding If") {
    SyntaxNode root = parse_toy(kTwoMethods);
    const SyntaxNode* cls = find_kind(root, "ClassDef");
    REQUIRE(cls);
    std::vector<const SyntaxNode*> funcs;
    std::function<void(const SyntaxNode&)> collect = [&](const SyntaxNode& n) {
        for (const SyntaxNode& c : n.children) {
            if (c.kind == "FuncDef") funcs.push_back(&c);
            else if (c.kind != "ClassDef") collect(c);
        }
    };
    collect(*cls);
    REQUIRE(funcs.size() == 2);
    CHECK(find_kind(*funcs[0], "While") == nullptr);
    const SyntaxNode* loop = find_kind(*funcs[1], "While");
    REQUIRE(loop);
    CHECK(find_kind(*loop, "If") != nullptr);
}

TEST_CASE("toy parser: error paths carry line numbers") {
    auto line_of = [](std::string_view src) -> std::size_t {
        try {
            parse_toy(src);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("def f(:\n    pass\n") == 1);
    CHECK(line_of("x = 1\ny = (2\n") == 2);
    CHECK(line_of("if x:\n        a = 1\n    b = 2\n") == 3);
    CHECK(line_of("x = 'open\n") == 1);
    CHECK(line_of("x = $\n") == 1);
    CHECK(line_of("def f():\npass\n") == 2);
}

TEST_CASE("toy parser: comments become nodes") {
    SyntaxNode root = parse_toy("x = 1  # note\n# trailing\n");
    int comments = 0;
    std::function<void(const SyntaxNode&)> count = [&](const SyntaxNode& n) {
        comments += n.kind == "Comment";
        for (const SyntaxNode& c : n.children) count(c);
    };
    count(root);
    CHECK(comments == 2);
}

TEST_CASE("toy records rebuild to the same tree") {
    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        std::string src = astprep::testing::random_toy_program(rng, 4);
        SyntaxNode a = parse_toy(src);
        SyntaxNode b = build_syntax_tree(toy_records(src));
        CHECK(to_records(a).size() == to_records(b).size());
        CHECK(child_kinds(a) == child_kinds(b));
    }
}

TEST_CASE("build_syntax_tree rejects malformed streams") {
    CHECK_THROWS_AS(build_syntax_tree({}), ParseError);
    CHECK_THROWS_AS(build_syntax_tree({{"A", 0, 10, 0}, {"B", 0, 4, 2}}), ParseError);
    CHECK_THROWS_AS(build_syntax_tree({{"A", 0, 10, 0}, {"B", 5, 12, 1}}), ParseError);
    CHECK_THROWS_AS(build_syntax_tree({{"A", 0, 10, 0}, {"B", 0, 6, 1}, {"C", 5, 8, 1}}), ParseError);
    CHECK_THROWS_AS(build_syntax_tree({{"A", 0, 10, 0}, {"B", 0, 10, 0}}), ParseError);
    SyntaxNode ok = build_syntax_tree({{"A", 0, 10, 0}, {"B", 0, 4, 1}, {"C", 1, 2, 2}, {"D", 6, 10, 1}});
    CHECK(child_kinds(ok) == std::vector<std::string>{"B", "D"});
}

TEST_CASE("parse modes") {
    ToyBackend toy;
    CHECK_THROWS_AS(parse("def (:\n", Language::Toy, toy, ParseMode::Strict), ParseError);
    SyntaxTree lenient = parse("def (:\n", Language::Toy, toy, ParseMode::Lenient);
    CHECK(lenient.degenerate);
    CHECK(lenient.root.span == ByteRange{0, 7});
    CHECK(lenient.root.children.empty());
    CHECK_THROWS_AS(parse("x = 1\n", Language::Python, toy, ParseMode::Lenient), ConfigError);
}

TEST_CASE("empty file gives a root of zero extent") {
    ToyBackend toy;
    SyntaxTree t = parse("", Language::Toy, toy);
    CHECK(t.root.span.size() == 0);
    CHECK(t.root.children.empty());
    SpanTree st = align(t, tokenize(VocabSpec::byte_level(), ""));
    CHECK(st.token_count() == 0);
    CHECK(st.node_count() == 1);
    CHECK(subtree_spans(st).empty());
}

TEST_CASE("align: exact token match gives a leaf") {
    SyntaxTree t;
    t.source_size = 3;
    t.root = {"Root", {0, 3}, {{"Name", {1, 2}, {}}}};
    SpanTree st = align(t, tokenize(VocabSpec::byte_level(), "a+b"));
    validate(st);
    REQUIRE(st.node(0).children.size() == 3);
    const SpanNode& name = st.node(st.node(0).children[1]);
    CHECK(name.kind == "Name");
    CHECK(name.l == 1);
    CHECK(name.r == 1);
    CHECK(name.children.empty());
    CHECK(st.node(st.node(0).children[0]).synthetic);
}

TEST_CASE("align: a token wider than the node is included") {
    VocabSpec v = VocabSpec::byte_level({{"a", "b"}, {"ab", "c"}, {"abc", "d"}, {"abcd", "e"}, {"abcde", "f"},
                                         {"abcdef", "g"}, {"abcdefg", "h"}, {"abcdefgh", "i"}});
    TokenizedFile tok = tokenize(v, "abcdefghi");
    REQUIRE(tok.size() == 1);
    SyntaxTree t;
    t.source_size = 9;
    t.root = {"Root", {0, 9}, {{"Inner", {4, 9}, {}}}};
    SpanTree st = align(t, tok);
    validate(st);
    REQUIRE(st.node(0).children.size() == 1);
    const SpanNode& inner = st.node(st.node(0).children[0]);
    CHECK(inner.l == 0);
    CHECK(inner.r == 0);
}

TEST_CASE("align: a straddling token goes to the earlier sibling") {
    // "ab" is one token straddling A=[0,1) and B=[1,3).
    VocabSpec v = VocabSpec::byte_level({{"a", "b"}});
    TokenizedFile tok = tokenize(v, "abc");
    REQUIRE(tok.size() == 2);
    SyntaxTree t;
    t.source_size = 3;
    t.root = {"Root", {0, 3}, {{"A", {0, 1}, {}}, {"B", {1, 3}, {}}}};
    SpanTree st = align(t, tok);
    validate(st);
    REQUIRE(st.node(0).children.size() == 2);
    CHECK(st.node(st.node(0).children[0]).l == 0);
    CHECK(st.node(st.node(0).children[0]).r == 0);
    CHECK(st.node(st.node(0).children[1]).l == 1);
    CHECK(st.node(st.node(0).children[1]).r == 1);
}

TEST_CASE("align: recursive call expression maps to its token run") {
    VocabSpec v = VocabSpec::byte_level({{"f", "a"}, {"fa", "c"}, {"fac", "t"}, {"o", "r"}, {"or", "i"},
                                         {"ori", "a"}, {"oria", "l"}});
    ToyBackend toy;
    TokenizedFile tok = tokenize(v, kFactorial);
    SpanTree st = align(parse(kFactorial, Language::Toy, toy), tok);
    validate(st);
    bool found = false;
    for (const SpanNode& n : st.nodes()) {
        if (n.kind != "BinaryExpr") continue;
        std::vector<TokenId> ids(tok.ids.begin() + n.l, tok.ids.begin() + n.r + 1);
        if (detokenize(v, ids) == "n * factorial(n - 1)") found = true;
    }
    CHECK(found);
    // "factorial" is two tokens, so the Name node gets two synthetic leaves.
    for (const SpanNode& n : st.nodes()) {
        if (n.kind != "Name" || n.size() != 2) continue;
        CHECK(n.children.size() == 2);
        CHECK(st.node(n.children[0]).synthetic);
    }
}

TEST_CASE("align rejects mismatched inputs") {
    SyntaxTree t;
    t.source_size = 4;
    t.root = {"Root", {0, 4}, {}};
    CHECK_THROWS_AS(align(t, tokenize(VocabSpec::byte_level(), "abc")), AlignmentError);
    TokenizedFile broken = tokenize(VocabSpec::byte_level(), "abcd");
    broken.offsets[1].start = 2;
    CHECK_THROWS_AS(align(t, broken), AlignmentError);
}

TEST_CASE("subtree_spans examples") {
    SpanTree leaf = span_tree_from_spans(1, {});
    CHECK(subtree_spans(leaf).empty());

    SpanTree two = span_tree_from_spans(10, {{0, 9}, {0, 4}, {5, 9}});
    std::vector<TokenSpan> s = subtree_spans(two);
    REQUIRE(s.size() == 3);
    CHECK(s[0] == TokenSpan{0, 9});
    CHECK(s[1] == TokenSpan{0, 4});
    CHECK(s[2] == TokenSpan{5, 9});

    // A full binary tree over 8 leaves has 8 - 1 internal nodes, all of size >= 2.
    CHECK(subtree_spans(astprep::testing::balanced_tree(8)).size() == 7);
}

TEST_CASE("span_tree_from_spans validates laminarity") {
    CHECK_THROWS_AS(span_tree_from_spans(10, {{0, 5}, {3, 8}}), ValidationError);
    CHECK_THROWS_AS(span_tree_from_spans(10, {{0, 10}}), ValidationError);
    SpanTree t = span_tree_from_spans(6, {{1, 3}});
    CHECK(t.node(0).kind == "Root");
    CHECK(t.node(0).l == 0);
    CHECK(t.node(0).r == 5);
    validate(t);
}

TEST_CASE("restrict_to_chunk clips and rebases") {
    SpanTree t = astprep::testing::nested_class_tree();
    SpanTree c = restrict_to_chunk(t, 41, 64);
    validate(c);
    CHECK(c.token_count() == 23);
    CHECK(c.node(0).kind == "Chunk");
    std::set<std::tuple<std::string, int, int>> got;
    for (const SpanNode& n : c.nodes())
        if (!n.synthetic) got.insert({n.kind, n.l, n.r});
    // The chunk root stands in for the clipped file root.
    CHECK_FALSE(got.count({"ClassDef", 0, 22}));
    CHECK(got.count({"FuncDef", 0, 22}));
    CHECK(got.count({"If", 5, 22}));
    CHECK_THROWS(restrict_to_chunk(t, 10, 5));
}

TEST_CASE("property: aligned trees are valid and partition the tokens") {
    Rng rng(2024);
    VocabSpec shipped = load_vocab(ASTPREP_VOCAB_DIR);
    VocabSpec bytes = VocabSpec::byte_level();
    ToyBackend toy;
    for (int trial = 0; trial < 60; ++trial) {
        std::string src = astprep::testing::random_toy_program(rng, 1 + trial % 5);
        SyntaxTree syn = parse(src, Language::Toy, toy);
        for (const VocabSpec* v : {&shipped, &bytes}) {
            TokenizedFile tok = tokenize(*v, src);
            SpanTree st = align(syn, tok);
            validate(st);
            CHECK(frontier(st) == iota_vec(st.token_count()));
            CHECK(st.node(0).l == 0);
            CHECK(st.node(0).r == st.token_count() - 1);
            // Minimal cover: the first and last tokens of every real node
            // touch its byte span.
            std::vector<SyntaxRecord> recs = to_records(syn.root);
            for (const SpanNode& n : st.nodes()) {
                if (n.synthetic || &n == &st.node(0)) continue;
                bool matched = false;
                for (const SyntaxRecord& r : recs) {
                    if (r.kind != n.kind || r.byte_end <= r.byte_start) continue;
                    const ByteRange first = tok.offsets[n.l], last = tok.offsets[n.r];
                    if (first.end > r.byte_start && first.start < r.byte_end && last.start < r.byte_end &&
                        last.end > r.byte_start && last.end >= r.byte_end && first.start <= r.byte_start) {
                        matched = true;
                        break;
                    }
                }
                CHECK_MESSAGE(matched, n.kind << " [" << n.l << "," << n.r << "]");
            }
        }
        // Under a byte vocabulary spans equal byte spans exactly.
        TokenizedFile tok = tokenize(bytes, src);
        SpanTree st = align(syn, tok);
        std::multiset<std::tuple<std::string, int, int>> want, got;
        for (const SyntaxRecord& r : to_records(syn.root))
            if (r.byte_end > r.byte_start && r.depth > 0)
                want.insert({r.kind, static_cast<int>(r.byte_start), static_cast<int>(r.byte_end) - 1});
        for (std::size_t i = 1; i < st.node_count(); ++i)
            if (!st.node(static_cast<NodeIndex>(i)).synthetic)
                got.insert({st.node(static_cast<NodeIndex>(i)).kind, st.node(static_cast<NodeIndex>(i)).l,
                            st.node(static_cast<NodeIndex>(i)).r});
        CHECK(got == want);
    }
}

TEST_CASE("property: random span trees partition the tokens") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::int32_t>(rng.uniform_int(1, 150));
        SpanTree t = astprep::testing::random_span_tree(rng, n);
        validate(t);
        CHECK(frontier(t) == iota_vec(n));
        for (const SpanNode& node : t.nodes()) {
            std::int32_t sum = 0;
            for (NodeIndex c : node.children) sum += t.node(c).size();
            if (!node.children.empty()) CHECK(sum == node.size());
        }
    }
}
