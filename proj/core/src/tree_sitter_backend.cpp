#include "astprep/tree_sitter_backend.hpp"

#include "astprep/errors.hpp"
#include "astprep/toy_language.hpp"

#include <tree_sitter/api.h>

#include <dlfcn.h>

#include <cstdlib>
#include <string>
#include <vector>

namespace astprep {

namespace {

struct GrammarName {
    Language lang;
    const char* symbol;
    std::vector<const char*> files;
};

const std::vector<GrammarName>& grammar_names() {
    static const std::vector<GrammarName> names{
        {Language::Python, "python", {"libtree-sitter-python.so"}},
        {Language::Java, "java", {"libtree-sitter-java.so"}},
        {Language::C, "c", {"libtree-sitter-c.so"}},
        {Language::Cpp, "cpp", {"libtree-sitter-cpp.so"}},
        {Language::CSharp, "c_sharp", {"libtree-sitter-c-sharp.so", "libtree-sitter-c_sharp.so"}},
    };
    return names;
}

const GrammarName* find_name(Language lang) {
    for (const auto& g : grammar_names())
        if (g.lang == lang) return &g;
    return nullptr;
}

struct ParserDeleter {
    void operator()(TSParser* p) const { ts_parser_delete(p); }
};
struct TreeDeleter {
    void operator()(TSTree* t) const { ts_tree_delete(t); }
};

}  // namespace

struct TreeSitterBackend::Grammar {
    void* handle = nullptr;
    const TSLanguage* language = nullptr;
    ~Grammar() {
        if (handle) dlclose(handle);
    }
};

std::optional<std::filesystem::path> grammar_dir_from_env() {
    const char* dir = std::getenv(kGrammarDirEnv);
    if (!dir || !*dir) return std::nullopt;
    return std::filesystem::path(dir);
}

TreeSitterBackend::TreeSitterBackend(std::filesystem::path grammar_dir) : state_(std::make_shared<State>()) {
    state_->dir = std::move(grammar_dir);
}

TreeSitterBackend::~TreeSitterBackend() = default;

std::shared_ptr<TreeSitterBackend::Grammar> TreeSitterBackend::grammar(Language lang) const {
    std::lock_guard lock(state_->mutex);
    auto it = state_->loaded.find(lang);
    if (it != state_->loaded.end()) return it->second;

    std::shared_ptr<Grammar> g;
    if (const GrammarName* name = find_name(lang)) {
        for (const char* file : name->files) {
            auto path = state_->dir / file;
            if (!std::filesystem::exists(path)) continue;
            void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
            if (!handle) continue;
            auto entry = reinterpret_cast<const TSLanguage* (*)()>(
                dlsym(handle, (std::string("tree_sitter_") + name->symbol).c_str()));
            if (!entry) {
                dlclose(handle);
                continue;
            }
            g = std::make_shared<Grammar>();
            g->handle = handle;
            g->language = entry();
            break;
        }
    }
    state_->loaded.emplace(lang, g);
    return g;
}

bool TreeSitterBackend::supports(Language lang) const { return grammar(lang) != nullptr; }

std::vector<SyntaxRecord> TreeSitterBackend::parse(Language lang, std::string_view source) const {
    auto g = grammar(lang);
    if (!g)
        throw ConfigError("no tree-sitter grammar for '" + std::string(language_name(lang)) + "' in " +
                          state_->dir.string());
    std::unique_ptr<TSParser, ParserDeleter> parser(ts_parser_new());
    if (!ts_parser_set_language(parser.get(), g->language))
        throw ConfigError("tree-sitter grammar for '" + std::string(language_name(lang)) +
                          "' has an incompatible ABI version");
    std::unique_ptr<TSTree, TreeDeleter> tree(
        ts_parser_parse_string(parser.get(), nullptr, source.data(), static_cast<uint32_t>(source.size())));
    if (!tree) throw ParseError("tree-sitter parse failed");
    TSNode root = ts_tree_root_node(tree.get());
    if (ts_node_has_error(root)) throw ParseError("source contains syntax errors");

    std::vector<SyntaxRecord> out;
    TSTreeCursor cursor = ts_tree_cursor_new(root);
    int depth = 0;
    for (;;) {
        TSNode node = ts_tree_cursor_current_node(&cursor);
        out.push_back({ts_node_type(node), ts_node_start_byte(node), ts_node_end_byte(node), depth});
        if (ts_tree_cursor_goto_first_child(&cursor)) {
            ++depth;
            continue;
        }
        bool done = false;
        while (!ts_tree_cursor_goto_next_sibling(&cursor)) {
            if (!ts_tree_cursor_goto_parent(&cursor)) {
                done = true;
                break;
            }
            --depth;
        }
        if (done) break;
    }
    ts_tree_cursor_delete(&cursor);
    // Root extends over leading and trailing whitespace so alignment sees the whole file.
    out.front().byte_start = 0;
    out.front().byte_end = source.size();
    return out;
}

std::unique_ptr<ParserBackend> TreeSitterBackend::clone() const {
    return std::unique_ptr<ParserBackend>(new TreeSitterBackend(state_));
}

CompositeBackend::CompositeBackend(std::optional<std::filesystem::path> grammar_dir)
    : toy_(std::make_unique<ToyBackend>()) {
    if (grammar_dir) tree_sitter_ = std::make_unique<TreeSitterBackend>(*grammar_dir);
}

bool CompositeBackend::supports(Language lang) const {
    if (toy_->supports(lang)) return true;
    return tree_sitter_ && tree_sitter_->supports(lang);
}

std::vector<SyntaxRecord> CompositeBackend::parse(Language lang, std::string_view source) const {
    if (toy_->supports(lang)) return toy_->parse(lang, source);
    if (!tree_sitter_)
        throw ConfigError("no grammar directory configured for '" + std::string(language_name(lang)) + "' (set " +
                          kGrammarDirEnv + ")");
    return tree_sitter_->parse(lang, source);
}

std::unique_ptr<ParserBackend> CompositeBackend::clone() const {
    std::unique_ptr<CompositeBackend> copy(new CompositeBackend());
    copy->toy_ = toy_->clone();
    if (tree_sitter_) copy->tree_sitter_ = tree_sitter_->clone();
    return copy;
}

}  // namespace astprep
