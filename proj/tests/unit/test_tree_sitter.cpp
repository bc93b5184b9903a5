#include "astprep/errors.hpp"
#include "astprep/tree_sitter_backend.hpp"
#include "astprep/tokenizer.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <thread>

using namespace astprep;

namespace {

std::optional<std::filesystem::path> grammars() {
    auto dir = grammar_dir_from_env();
    if (!dir || !std::filesystem::exists(*dir / "libtree-sitter-python.so")) return std::nullopt;
    return dir;
}

const SyntaxNode* find_kind(const SyntaxNode& n, std::string_view kind) {
    if (n.kind == kind) return &n;
    for (const SyntaxNode& c : n.children)
        if (const SyntaxNode* hit = find_kind(c, kind)) return hit;
    return nullptr;
}

void collect(const SyntaxNode& n, std::string_view kind, std::vector<const SyntaxNode*>& out) {
    for (const SyntaxNode& c : n.children) {
        if (c.kind == kind) out.push_back(&c);
        else collect(c, kind, out);
    }
}

}  // namespace

TEST_CASE("python grammar: function definition") {
    auto dir = grammars();
    if (!dir) {
        MESSAGE("python grammar not built; skipping");
        return;
    }
    TreeSitterBackend ts(*dir);
    CHECK(ts.supports(Language::Python));
    std::string src = "def f():\n    return 1\n";
    SyntaxTree t = parse(src, Language::Python, ts);
    CHECK(t.root.kind == "module");
    CHECK(t.root.span == ByteRange{0, src.size()});
    const SyntaxNode* fn = find_kind(t.root, "function_definition");
    REQUIRE(fn);
    CHECK(src.substr(fn->span.start, fn->span.size()) == "def f():\n    return 1");
}

TEST_CASE("python grammar: class with two methods, loop holding a branch") {
    auto dir = grammars();
    if (!dir) return;
    TreeSitterBackend ts(*dir);
    std::string src =
        "class Stack:\n"
        "    def push(self, item):\n"
        "        self.items.append(item)\n"
        "\n"
        "    def drain(self):\n"
        "        while self.items:\n"
        "            if len(self.items) > 1:\n"
        "                print(self.items.pop())\n";
    SyntaxTree t = parse(src, Language::Python, ts);
    const SyntaxNode* cls = find_kind(t.root, "class_definition");
    REQUIRE(cls);
    std::vector<const SyntaxNode*> funcs;
    collect(*cls, "function_definition", funcs);
    REQUIRE(funcs.size() == 2);
    CHECK(find_kind(*funcs[0], "while_statement") == nullptr);
    const SyntaxNode* loop = find_kind(*funcs[1], "while_statement");
    REQUIRE(loop);
    CHECK(find_kind(*loop, "if_statement"));

    SpanTree st = align(t, tokenize(load_vocab(ASTPREP_VOCAB_DIR), src));
    validate(st);
}

TEST_CASE("python grammar: syntax errors and routing") {
    auto dir = grammars();
    if (!dir) return;
    TreeSitterBackend ts(*dir);
    CHECK_THROWS_AS(parse("def f(:\n  return\n", Language::Python, ts), ParseError);
    SyntaxTree lenient = parse("def f(:\n", Language::Python, ts, ParseMode::Lenient);
    CHECK(lenient.degenerate);
    // No Java module is shipped in the grammar directory.
    CHECK_FALSE(ts.supports(Language::Java));
    CHECK_THROWS_AS(parse("class A {}", Language::Java, ts), ConfigError);

    CompositeBackend composite(*dir);
    CHECK(composite.supports(Language::Toy));
    CHECK(composite.supports(Language::Python));
    CHECK_FALSE(composite.supports(Language::Markdown));
    CompositeBackend toy_only(std::nullopt);
    CHECK(toy_only.supports(Language::Toy));
    CHECK_FALSE(toy_only.supports(Language::Python));
}

TEST_CASE("python grammar: concurrent parses agree") {
    auto dir = grammars();
    if (!dir) return;
    TreeSitterBackend ts(*dir);
    Rng rng(5);
    std::vector<std::string> sources;
    for (int i = 0; i < 16; ++i) sources.push_back(testing::random_python_program(rng, 6));
    auto flatten = [](const ParserBackend& b, const std::string& s) {
        std::string out;
        for (const SyntaxRecord& r : b.parse(Language::Python, s))
            out += r.kind + ":" + std::to_string(r.byte_start) + "-" + std::to_string(r.byte_end) + "/" +
                   std::to_string(r.depth) + ";";
        return out;
    };
    std::vector<std::string> serial;
    for (const auto& s : sources) serial.push_back(flatten(ts, s));
    std::vector<std::string> parallel(sources.size());
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < 4; ++w)
            pool.emplace_back([&, w, handle = ts.clone()] {
                for (std::size_t i = static_cast<std::size_t>(w); i < sources.size(); i += 4)
                    parallel[i] = flatten(*handle, sources[i]);
            });
    }
    CHECK(parallel == serial);
}

TEST_CASE("missing grammar directory is a configuration error") {
    TreeSitterBackend ts("/nonexistent/grammars");
    CHECK_FALSE(ts.supports(Language::Python));
    CHECK_THROWS_AS(ts.parse(Language::Python, "x = 1\n"), ConfigError);
}
