#pragma once

#include "astprep/ast_parse.hpp"

#include <memory>
#include <string_view>
#include <vector>

namespace astprep {

/// Recursive-descent parser for a small indentation-structured language
/// (class/def/while/if/elif/else/return/pass, assignments and expressions),
/// used where no grammar asset is available. Keywords and punctuation are not
/// emitted as nodes; alignment wraps them as synthetic leaves.
///
/// Node kinds: Module ClassDef FuncDef Params Block While If Elif Else Return
/// Pass Assign ExprStmt BoolExpr BinaryExpr UnaryExpr Call Args Attr Subscript
/// Paren List Name Number String Comment.
SyntaxNode parse_toy(std::string_view source);

/// Pre-order record stream for parse_toy; throws ParseError with a line number.
std::vector<SyntaxRecord> toy_records(std::string_view source);

/// Stateless, shareable across threads.
class ToyBackend final : public ParserBackend {
public:
    bool supports(Language lang) const override { return lang == Language::Toy; }
    std::vector<SyntaxRecord> parse(Language lang, std::string_view source) const override;
    std::unique_ptr<ParserBackend> clone() const override { return std::make_unique<ToyBackend>(); }
};

/// Flattens a syntax tree into the backend record format.
std::vector<SyntaxRecord> to_records(const SyntaxNode& root);

}  // namespace astprep
