#include "fixtures.hpp"

#include "astprep/errors.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace astprep::testing {

namespace fs = std::filesystem;

std::vector<LabeledSpan> nested_class_spans() {
    // Tokens 0-2 are the class header; FuncDef1 has no compound statements;
    // FuncDef2 is header 41-45, If 46-63 (condition token 47), then While.
    return {
        {0, 111, "ClassDef"},  {3, 40, "FuncDef"},    {41, 111, "FuncDef"},
        {46, 63, "If"},        {64, 111, "While"},    {80, 111, "If"},
        {81, 100, "BinaryExpr"}, {94, 97, "Attr"},
    };
}

SpanTree nested_class_tree() { return span_tree_from_spans(kNestedClassTokens, nested_class_spans()); }

std::string nested_class_source() {
    std::string s;
    for (std::int32_t i = 0; i < kNestedClassTokens; ++i) s.push_back(static_cast<char>('a' + i % 26));
    return s;
}

namespace {

class NestedClassBackend final : public ParserBackend {
public:
    bool supports(Language lang) const override { return lang == Language::Toy; }
    std::vector<SyntaxRecord> parse(Language, std::string_view source) const override {
        if (source.size() != static_cast<std::size_t>(kNestedClassTokens)) throw ParseError("not the nested-class file");
        // Depths follow from containment; spans are listed in pre-order.
        std::vector<LabeledSpan> spans = nested_class_spans();
        std::vector<SyntaxRecord> out;
        for (std::size_t i = 0; i < spans.size(); ++i) {
            int depth = 0;
            for (std::size_t j = 0; j < i; ++j)
                if (spans[j].l <= spans[i].l && spans[i].r <= spans[j].r) ++depth;
            out.push_back({spans[i].kind, static_cast<std::size_t>(spans[i].l),
                           static_cast<std::size_t>(spans[i].r) + 1, depth});
        }
        return out;
    }
    std::unique_ptr<ParserBackend> clone() const override { return std::make_unique<NestedClassBackend>(); }
};

void random_children(Rng& rng, std::int32_t l, std::int32_t r, int max_children, double p_node,
                     std::vector<LabeledSpan>& out) {
    const std::int32_t size = r - l + 1;
    if (size < 2) return;
    const int parts = static_cast<int>(rng.uniform_int(2, std::min<std::int64_t>(max_children, size)));
    // Choose parts-1 distinct interior boundaries in (l, r].
    std::vector<std::int32_t> bounds;
    while (static_cast<int>(bounds.size()) < parts - 1) {
        auto b = static_cast<std::int32_t>(rng.uniform_int(l + 1, r));
        if (std::find(bounds.begin(), bounds.end(), b) == bounds.end()) bounds.push_back(b);
    }
    std::sort(bounds.begin(), bounds.end());
    bounds.push_back(r + 1);
    std::int32_t begin = l;
    for (std::int32_t end : bounds) {
        if (end - begin >= 2 && rng.uniform01() < p_node) {
            out.push_back({begin, end - 1, "Node"});
            random_children(rng, begin, end - 1, max_children, p_node, out);
        }
        begin = end;
    }
}

}  // namespace

std::unique_ptr<ParserBackend> nested_class_backend() { return std::make_unique<NestedClassBackend>(); }

SpanTree random_span_tree(Rng& rng, std::int32_t n, int max_children, double p_node) {
    std::vector<LabeledSpan> spans;
    if (n >= 1) spans.push_back({0, n - 1, "Root"});
    random_children(rng, 0, n - 1, max_children, p_node, spans);
    return span_tree_from_spans(n, std::move(spans));
}

SpanTree balanced_tree(std::int32_t leaves) {
    if (leaves < 1 || (leaves & (leaves - 1)) != 0) throw std::invalid_argument("leaves must be a power of two");
    std::vector<LabeledSpan> spans;
    for (std::int32_t width = leaves; width >= 2; width /= 2)
        for (std::int32_t l = 0; l < leaves; l += width) spans.push_back({l, l + width - 1, "Node"});
    return span_tree_from_spans(leaves, std::move(spans));
}

SpanTree deep_tree() {
    // Each node keeps one-token keyword leaves at both ends and splits the
    // middle into a dominant child and a few small siblings.
    Rng rng(0xDEE9'7EE5ull);
    std::vector<LabeledSpan> spans;
    std::function<void(std::int32_t, std::int32_t)> grow = [&](std::int32_t l, std::int32_t r) {
        std::int32_t lo = l + 1, hi = r - 1;
        while (hi - lo + 1 >= 2) {
            const std::int32_t room = hi - lo + 1;
            std::int32_t len = room <= 6 ? room : static_cast<std::int32_t>(rng.uniform_int(2, std::max(2, room / 3)));
            if (rng.uniform01() < 0.35) len = std::max<std::int32_t>(2, room * 3 / 5);
            len = std::min(len, room);
            spans.push_back({lo, lo + len - 1, "Node"});
            if (len >= 4) grow(lo, lo + len - 1);
            lo += len + static_cast<std::int32_t>(rng.uniform_int(0, 1));
        }
    };
    constexpr std::int32_t n = 600;
    spans.push_back({0, n - 1, "Module"});
    grow(0, n - 1);
    return span_tree_from_spans(n, std::move(spans));
}

std::int64_t breaks_by_spans(const SpanTree& tree, const std::vector<std::int32_t>& cuts) {
    std::int64_t total = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        for (const SpanNode& node : tree.nodes())
            if (node.r > node.l && node.l < cuts[k] && cuts[k] <= node.r) ++total;
    return total;
}

Partition exhaustive_partition(const SpanTree& tree, std::int32_t max_len) {
    const std::int32_t n = tree.token_count();
    Partition best;
    if (n == 0) return best;
    // at_cut[c]: nodes broken by a boundary after c tokens.
    std::vector<std::int64_t> at_cut(static_cast<std::size_t>(n) + 1, 0);
    for (std::int32_t c = 1; c < n; ++c)
        for (const SpanNode& node : tree.nodes())
            if (node.r > node.l && node.l < c && c <= node.r) ++at_cut[c];

    bool found = false;
    std::vector<std::int32_t> cuts;
    auto better = [&](std::int64_t cost) {
        if (!found || cost < best.breaks) return true;
        if (cost > best.breaks) return false;
        if (cuts.size() != best.cuts.size()) return cuts.size() < best.cuts.size();
        for (std::size_t i = cuts.size(); i-- > 0;)
            if (cuts[i] != best.cuts[i]) return cuts[i] < best.cuts[i];
        return false;
    };
    std::function<void(std::int32_t, std::int64_t)> dfs = [&](std::int32_t pos, std::int64_t cost) {
        if (found && cost > best.breaks) return;
        for (std::int32_t len = 1; len <= max_len && pos + len <= n; ++len) {
            const std::int32_t c = pos + len;
            cuts.push_back(c);
            if (c == n) {
                if (better(cost)) {
                    best.breaks = cost;
                    best.cuts = cuts;
                    found = true;
                }
            } else {
                dfs(c, cost + at_cut[c]);
            }
            cuts.pop_back();
        }
    };
    dfs(0, 0);
    return best;
}

namespace {

const char* const kNames[] = {"x", "y", "total", "count", "node", "value", "item", "acc", "buf", "left", "right"};
const char* const kFuncs[] = {"compute", "helper", "visit", "merge", "scan", "update"};
const char* const kBinOps[] = {"+", "-", "*", "//", "%"};
const char* const kCmpOps[] = {"<", ">", "==", "!=", "<=", ">="};

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&arr)[N]) {
    return arr[rng.below(N)];
}

std::string expr(Rng& rng, int depth) {
    const auto choice = depth <= 0 ? rng.below(2) : rng.below(7);
    switch (choice) {
        case 0: return pick(rng, kNames);
        case 1: return std::to_string(rng.below(1000));
        case 2: return expr(rng, depth - 1) + " " + pick(rng, kBinOps) + " " + expr(rng, depth - 1);
        case 3: return std::string(pick(rng, kFuncs)) + "(" + expr(rng, depth - 1) + ", " + expr(rng, depth - 1) + ")";
        case 4: return "(" + expr(rng, depth - 1) + ")";
        case 5: return std::string(pick(rng, kNames)) + "." + pick(rng, kNames);
        default: return "[" + expr(rng, depth - 1) + ", " + expr(rng, depth - 1) + "]";
    }
}

std::string cond(Rng& rng) {
    return std::string(pick(rng, kNames)) + " " + pick(rng, kCmpOps) + " " + expr(rng, 1);
}

void block(Rng& rng, std::ostringstream& out, int indent, int depth, int count) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    for (int s = 0; s < count; ++s) {
        const auto kind = depth <= 0 ? rng.below(3) : rng.below(6);
        switch (kind) {
            case 0: out << pad << pick(rng, kNames) << " = " << expr(rng, 2) << "\n"; break;
            case 1: out << pad << pick(rng, kFuncs) << "(" << expr(rng, 1) << ")\n"; break;
            case 2: out << pad << "return " << expr(rng, 2) << "\n"; break;
            case 3:
                out << pad << "while " << cond(rng) << ":\n";
                block(rng, out, indent + 4, depth - 1, 1 + static_cast<int>(rng.below(3)));
                break;
            case 4:
                out << pad << "if " << cond(rng) << ":\n";
                block(rng, out, indent + 4, depth - 1, 1 + static_cast<int>(rng.below(3)));
                if (rng.below(2)) {
                    out << pad << "else:\n";
                    block(rng, out, indent + 4, depth - 1, 1 + static_cast<int>(rng.below(2)));
                }
                break;
            default:
                out << pad << "# " << pick(rng, kNames) << " " << pick(rng, kFuncs) << "\n";
                out << pad << pick(rng, kNames) << " = " << expr(rng, 1) << "\n";
                break;
        }
    }
}

// The generated subset is valid in both the Toy language and Python.
std::string program(Rng& rng, int statements) {
    std::ostringstream out;
    for (int s = 0; s < statements; ++s) {
        if (rng.below(3) == 0) {
            out << "class " << "Widget" << s << ":\n";
            const int methods = 1 + static_cast<int>(rng.below(3));
            for (int m = 0; m < methods; ++m) {
                out << "    def " << pick(rng, kFuncs) << m << "(self, " << pick(rng, kNames) << "):\n";
                block(rng, out, 8, 3, 2 + static_cast<int>(rng.below(4)));
            }
        } else {
            out << "def " << pick(rng, kFuncs) << s << "(" << pick(rng, kNames) << ", " << "arg" << s << "):\n";
            block(rng, out, 4, 3, 2 + static_cast<int>(rng.below(5)));
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

std::string random_toy_program(Rng& rng, int statements) { return program(rng, statements); }

std::string random_python_program(Rng& rng, int statements) {
    return "import os\n\n\n" + program(rng, statements);
}

std::string random_markdown(Rng& rng, int paragraphs) {
    static const char* const words[] = {"the", "parser", "returns", "a", "tree", "of", "nodes", "and", "each",
                                        "chunk", "is", "masked", "before", "training", "with", "spans"};
    std::ostringstream out;
    out << "# Notes " << rng.below(100) << "\n\n";
    for (int p = 0; p < paragraphs; ++p) {
        const int len = 10 + static_cast<int>(rng.below(60));
        for (int w = 0; w < len; ++w) out << (w ? " " : "") << pick(rng, words);
        out << ".\n\n";
    }
    return out.str();
}

fs::path scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path p = fs::temp_directory_path() /
                 ("astprep-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace astprep::testing
