#pragma once

#include "astprep/ast_parse.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace astprep {

/// Environment variable naming the directory that holds grammar modules.
inline constexpr const char* kGrammarDirEnv = "ASTPREP_GRAMMAR_DIR";

std::optional<std::filesystem::path> grammar_dir_from_env();

/// tree-sitter backend. Grammars are shared objects found in the grammar
/// directory as libtree-sitter-<name>.so exporting tree_sitter_<name>()
/// (python, java, c, cpp, c_sharp). Every parse call uses its own TSParser,
/// so one instance can serve many threads.
class TreeSitterBackend final : public ParserBackend {
public:
    explicit TreeSitterBackend(std::filesystem::path grammar_dir);
    ~TreeSitterBackend() override;

    bool supports(Language lang) const override;
    std::vector<SyntaxRecord> parse(Language lang, std::string_view source) const override;
    std::unique_ptr<ParserBackend> clone() const override;

    const std::filesystem::path& grammar_dir() const noexcept { return state_->dir; }

private:
    struct Grammar;
    struct State {
        std::filesystem::path dir;
        std::mutex mutex;
        std::map<Language, std::shared_ptr<Grammar>> loaded;
    };
    explicit TreeSitterBackend(std::shared_ptr<State> state) : state_(std::move(state)) {}
    std::shared_ptr<Grammar> grammar(Language lang) const;

    std::shared_ptr<State> state_;
};

/// Routes Toy to the built-in parser and everything else to a tree-sitter
/// backend (when a grammar directory is given).
class CompositeBackend final : public ParserBackend {
public:
    explicit CompositeBackend(std::optional<std::filesystem::path> grammar_dir);

    bool supports(Language lang) const override;
    std::vector<SyntaxRecord> parse(Language lang, std::string_view source) const override;
    std::unique_ptr<ParserBackend> clone() const override;

private:
    CompositeBackend() = default;
    std::unique_ptr<ParserBackend> toy_;
    std::unique_ptr<ParserBackend> tree_sitter_;
};

}  // namespace astprep
