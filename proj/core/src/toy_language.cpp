#include "astprep/toy_language.hpp"

#include "astprep/errors.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace astprep {

namespace {

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Lexeme {
    Tok type;
    std::string_view text;
    std::size_t start;
    std::size_t end;
    std::size_t line;
};

constexpr std::array<std::string_view, 13> kKeywords{"class", "def",  "while", "if",  "elif",
                                                     "else",  "return", "pass",  "and", "or",
                                                     "not",   "in",   "is"};

bool is_keyword(std::string_view s) {
    return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end();
}

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Lexeme> run(std::vector<ByteRange>& comments) {
        std::vector<std::size_t> indents{0};
        bool line_start = true;
        while (pos_ < src_.size()) {
            if (line_start && paren_depth_ == 0) {
                std::size_t col = 0;
                std::size_t p = pos_;
                while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t')) {
                    col = src_[p] == '\t' ? (col / 8 + 1) * 8 : col + 1;
                    ++p;
                }
                pos_ = p;
                if (p >= src_.size()) break;
                if (src_[p] == '\n' || src_[p] == '\r' || src_[p] == '#') {
                    // Blank and comment-only lines do not affect indentation.
                    if (src_[p] == '#') lex_comment(comments);
                    if (pos_ < src_.size() && src_[pos_] == '\r') ++pos_;
                    if (pos_ < src_.size() && src_[pos_] == '\n') {
                        ++pos_;
                        ++line_;
                    }
                    continue;
                }
                if (col > indents.back()) {
                    indents.push_back(col);
                    out_.push_back({Tok::Indent, {}, p, p, line_});
                } else {
                    while (col < indents.back()) {
                        indents.pop_back();
                        out_.push_back({Tok::Dedent, {}, p, p, line_});
                    }
                    if (col != indents.back()) throw ParseError("inconsistent dedent", line_);
                }
                line_start = false;
            }
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r') {
                ++pos_;
            } else if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
                pos_ += 2;
                ++line_;
            } else if (c == '\n') {
                if (paren_depth_ == 0) {
                    if (!out_.empty() && out_.back().type != Tok::Newline && out_.back().type != Tok::Indent &&
                        out_.back().type != Tok::Dedent)
                        out_.push_back({Tok::Newline, {}, pos_, pos_, line_});
                    line_start = true;
                }
                ++pos_;
                ++line_;
            } else if (c == '#') {
                lex_comment(comments);
            } else if (ident_start(c)) {
                lex_while(Tok::Name, ident_char);
            } else if (digit(c)) {
                lex_number();
            } else if (c == '"' || c == '\'') {
                lex_string(c);
            } else {
                lex_op();
            }
        }
        if (paren_depth_ > 0) throw ParseError("unclosed bracket", open_line_);
        if (!out_.empty() && out_.back().type != Tok::Newline && out_.back().type != Tok::Dedent)
            out_.push_back({Tok::Newline, {}, pos_, pos_, line_});
        while (indents.size() > 1) {
            indents.pop_back();
            out_.push_back({Tok::Dedent, {}, pos_, pos_, line_});
        }
        out_.push_back({Tok::End, {}, src_.size(), src_.size(), line_});
        return std::move(out_);
    }

private:
    void push(Tok t, std::size_t start) { out_.push_back({t, src_.substr(start, pos_ - start), start, pos_, line_}); }

    void lex_while(Tok t, bool (*pred)(char)) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && pred(src_[pos_])) ++pos_;
        push(t, start);
    }

    void lex_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && digit(src_[pos_ + 1])) {
            ++pos_;
            while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
        }
        push(Tok::Number, start);
    }

    void lex_string(char quote) {
        std::size_t start = pos_++;
        while (pos_ < src_.size() && src_[pos_] != quote) {
            if (src_[pos_] == '\n') throw ParseError("unterminated string literal", line_);
            if (src_[pos_] == '\\') ++pos_;
            ++pos_;
        }
        if (pos_ >= src_.size()) throw ParseError("unterminated string literal", line_);
        ++pos_;
        push(Tok::String, start);
    }

    void lex_comment(std::vector<ByteRange>& comments) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
        comments.push_back({start, pos_});
    }

    void lex_op() {
        static constexpr std::array<std::string_view, 6> two{"==", "!=", "<=", ">=", "//", "**"};
        static constexpr std::string_view one = "+-*/%<>=()[],:.";
        std::size_t start = pos_;
        for (auto op : two) {
            if (src_.substr(pos_, 2) == op) {
                pos_ += 2;
                push(Tok::Op, start);
                return;
            }
        }
        char c = src_[pos_];
        if (one.find(c) == std::string_view::npos)
            throw ParseError(std::string("unexpected character '") + c + "'", line_);
        if ((c == '(' || c == '[') && paren_depth_++ == 0) open_line_ = line_;
        if (c == ')' || c == ']') {
            if (paren_depth_ == 0) throw ParseError(std::string("unbalanced '") + c + "'", line_);
            --paren_depth_;
        }
        ++pos_;
        push(Tok::Op, start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    int paren_depth_ = 0;
    std::size_t open_line_ = 0;  ///< line of the outermost open bracket
    std::vector<Lexeme> out_;
};

class Parser {
public:
    Parser(std::string_view src, std::vector<Lexeme> toks) : src_(src), toks_(std::move(toks)) {}

    SyntaxNode module() {
        SyntaxNode mod{"Module", {0, src_.size()}, {}};
        while (!at(Tok::End)) {
            if (accept(Tok::Newline)) continue;
            if (at(Tok::Indent)) fail("unexpected indent");
            mod.children.push_back(statement());
        }
        return mod;
    }

private:
    const Lexeme& peek(std::size_t ahead = 0) const { return toks_[std::min(i_ + ahead, toks_.size() - 1)]; }
    bool at(Tok t) const { return peek().type == t; }
    bool at_op(std::string_view op) const { return at(Tok::Op) && peek().text == op; }
    bool at_kw(std::string_view kw) const { return at(Tok::Name) && peek().text == kw; }
    const Lexeme& next() { return toks_[i_++]; }
    bool accept(Tok t) {
        if (!at(t)) return false;
        ++i_;
        return true;
    }
    bool accept_op(std::string_view op) {
        if (!at_op(op)) return false;
        ++i_;
        return true;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        std::string near = peek().type == Tok::End ? "end of file" : "'" + std::string(peek().text) + "'";
        throw ParseError(msg + " near " + near, peek().line);
    }
    const Lexeme& expect_op(std::string_view op) {
        if (!at_op(op)) fail("expected '" + std::string(op) + "'");
        return next();
    }
    const Lexeme& expect_kw(std::string_view kw) {
        if (!at_kw(kw)) fail("expected '" + std::string(kw) + "'");
        return next();
    }
    std::size_t last_end() const { return toks_[i_ - 1].end; }

    static SyntaxNode make(std::string kind, std::size_t start, std::size_t end, std::vector<SyntaxNode> kids = {}) {
        return SyntaxNode{std::move(kind), {start, end}, std::move(kids)};
    }

    SyntaxNode name() {
        if (!at(Tok::Name) || is_keyword(peek().text)) fail("expected identifier");
        const Lexeme& l = next();
        return make("Name", l.start, l.end);
    }

    SyntaxNode statement() {
        if (at_kw("class")) return class_def();
        if (at_kw("def")) return func_def();
        if (at_kw("while")) return while_stmt();
        if (at_kw("if")) return if_stmt();
        SyntaxNode s = simple_statement();
        if (!accept(Tok::Newline) && !at(Tok::End) && !at(Tok::Dedent)) fail("expected end of line");
        return s;
    }

    SyntaxNode simple_statement() {
        std::size_t start = peek().start;
        if (at_kw("return")) {
            next();
            std::vector<SyntaxNode> kids;
            if (!at(Tok::Newline) && !at(Tok::End) && !at(Tok::Dedent)) kids.push_back(expression());
            return make("Return", start, last_end(), std::move(kids));
        }
        if (at_kw("pass")) {
            next();
            return make("Pass", start, last_end());
        }
        SyntaxNode target = expression();
        if (accept_op("=")) {
            SyntaxNode value = expression();
            return make("Assign", start, last_end(), {std::move(target), std::move(value)});
        }
        return make("ExprStmt", start, last_end(), {std::move(target)});
    }

    SyntaxNode block() {
        expect_op(":");
        if (!accept(Tok::Newline)) {
            SyntaxNode s = simple_statement();
            SyntaxNode b = make("Block", s.span.start, s.span.end, {});
            b.children.push_back(std::move(s));
            if (!accept(Tok::Newline) && !at(Tok::End) && !at(Tok::Dedent)) fail("expected end of line");
            return b;
        }
        if (!accept(Tok::Indent)) fail("expected an indented block");
        SyntaxNode b = make("Block", peek().start, 0);
        while (!accept(Tok::Dedent)) {
            if (at(Tok::End)) fail("unterminated block");
            if (accept(Tok::Newline)) continue;
            b.children.push_back(statement());
        }
        if (b.children.empty()) fail("empty block");
        b.span.end = b.children.back().span.end;
        return b;
    }

    SyntaxNode class_def() {
        std::size_t start = next().start;
        std::vector<SyntaxNode> kids;
        kids.push_back(name());
        if (at_op("(")) kids.push_back(arguments());
        kids.push_back(block());
        std::size_t end = kids.back().span.end;
        return make("ClassDef", start, end, std::move(kids));
    }

    SyntaxNode func_def() {
        std::size_t start = next().start;
        std::vector<SyntaxNode> kids;
        kids.push_back(name());
        std::size_t pstart = expect_op("(").start;
        std::vector<SyntaxNode> params;
        if (!at_op(")")) {
            do params.push_back(name());
            while (accept_op(","));
        }
        expect_op(")");
        kids.push_back(make("Params", pstart, last_end(), std::move(params)));
        kids.push_back(block());
        std::size_t end = kids.back().span.end;
        return make("FuncDef", start, end, std::move(kids));
    }

    SyntaxNode while_stmt() {
        std::size_t start = next().start;
        SyntaxNode cond = expression();
        SyntaxNode body = block();
        std::size_t end = body.span.end;
        return make("While", start, end, {std::move(cond), std::move(body)});
    }

    SyntaxNode if_stmt() {
        std::size_t start = next().start;
        std::vector<SyntaxNode> kids;
        kids.push_back(expression());
        kids.push_back(block());
        while (at_kw("elif") || at_kw("else")) {
            bool is_elif = at_kw("elif");
            std::size_t cstart = next().start;
            std::vector<SyntaxNode> clause;
            if (is_elif) clause.push_back(expression());
            clause.push_back(block());
            std::size_t cend = clause.back().span.end;
            kids.push_back(make(is_elif ? "Elif" : "Else", cstart, cend, std::move(clause)));
            if (!is_elif) break;
        }
        std::size_t end = kids.back().span.end;
        return make("If", start, end, std::move(kids));
    }

    SyntaxNode arguments() {
        std::size_t start = expect_op("(").start;
        std::vector<SyntaxNode> args;
        if (!at_op(")")) {
            do {
                if (at_op(")")) break;
                args.push_back(expression());
            } while (accept_op(","));
        }
        expect_op(")");
        return make("Args", start, last_end(), std::move(args));
    }

    SyntaxNode expression() { return bool_or(); }

    template <typename Next>
    SyntaxNode left_assoc(const char* kind, Next next_level, std::initializer_list<std::string_view> ops, bool keyword) {
        std::size_t start = peek().start;
        SyntaxNode lhs = (this->*next_level)();
        for (;;) {
            bool matched = false;
            for (auto op : ops) {
                if (keyword ? at_kw(op) : at_op(op)) {
                    matched = true;
                    break;
                }
            }
            if (!matched) return lhs;
            next();
            SyntaxNode rhs = (this->*next_level)();
            lhs = make(kind, start, last_end(), {std::move(lhs), std::move(rhs)});
        }
    }

    SyntaxNode bool_or() { return left_assoc("BoolExpr", &Parser::bool_and, {"or"}, true); }
    SyntaxNode bool_and() { return left_assoc("BoolExpr", &Parser::bool_not, {"and"}, true); }
    SyntaxNode bool_not() {
        if (at_kw("not")) {
            std::size_t start = next().start;
            SyntaxNode operand = bool_not();
            return make("UnaryExpr", start, last_end(), {std::move(operand)});
        }
        return comparison();
    }
    SyntaxNode comparison() {
        return left_assoc("BinaryExpr", &Parser::additive, {"==", "!=", "<", ">", "<=", ">="}, false);
    }
    SyntaxNode additive() { return left_assoc("BinaryExpr", &Parser::term, {"+", "-"}, false); }
    SyntaxNode term() { return left_assoc("BinaryExpr", &Parser::unary, {"*", "/", "%", "//", "**"}, false); }

    SyntaxNode unary() {
        if (at_op("-") || at_op("+")) {
            std::size_t start = next().start;
            SyntaxNode operand = unary();
            return make("UnaryExpr", start, last_end(), {std::move(operand)});
        }
        return postfix();
    }

    SyntaxNode postfix() {
        std::size_t start = peek().start;
        SyntaxNode node = atom();
        for (;;) {
            if (at_op("(")) {
                SyntaxNode args = arguments();
                node = make("Call", start, last_end(), {std::move(node), std::move(args)});
            } else if (accept_op(".")) {
                SyntaxNode attr = name();
                node = make("Attr", start, last_end(), {std::move(node), std::move(attr)});
            } else if (accept_op("[")) {
                SyntaxNode index = expression();
                expect_op("]");
                node = make("Subscript", start, last_end(), {std::move(node), std::move(index)});
            } else {
                return node;
            }
        }
    }

    SyntaxNode atom() {
        const Lexeme& l = peek();
        switch (l.type) {
            case Tok::Name:
                if (is_keyword(l.text)) fail("unexpected keyword");
                next();
                return make("Name", l.start, l.end);
            case Tok::Number:
                next();
                return make("Number", l.start, l.end);
            case Tok::String:
                next();
                return make("String", l.start, l.end);
            case Tok::Op:
                if (l.text == "(") {
                    next();
                    SyntaxNode inner = expression();
                    expect_op(")");
                    return make("Paren", l.start, last_end(), {std::move(inner)});
                }
                if (l.text == "[") {
                    next();
                    std::vector<SyntaxNode> items;
                    if (!at_op("]")) {
                        do {
                            if (at_op("]")) break;
                            items.push_back(expression());
                        } while (accept_op(","));
                    }
                    expect_op("]");
                    return make("List", l.start, last_end(), std::move(items));
                }
                break;
            default:
                break;
        }
        fail("expected expression");
    }

    std::string_view src_;
    std::vector<Lexeme> toks_;
    std::size_t i_ = 0;
};

// Places a comment under the deepest node containing it, keeping children sorted.
void insert_comment(SyntaxNode& node, ByteRange comment) {
    for (SyntaxNode& child : node.children) {
        if (child.span.start <= comment.start && comment.end <= child.span.end && !child.children.empty()) {
            insert_comment(child, comment);
            return;
        }
    }
    auto pos = std::find_if(node.children.begin(), node.children.end(),
                            [&](const SyntaxNode& c) { return c.span.start >= comment.end; });
    node.children.insert(pos, SyntaxNode{"Comment", comment, {}});
}

void flatten(const SyntaxNode& node, int depth, std::vector<SyntaxRecord>& out) {
    out.push_back({node.kind, node.span.start, node.span.end, depth});
    for (const SyntaxNode& c : node.children) flatten(c, depth + 1, out);
}

}  // namespace

SyntaxNode parse_toy(std::string_view source) {
    std::vector<ByteRange> comments;
    std::vector<Lexeme> toks = Lexer(source).run(comments);
    SyntaxNode root = Parser(source, std::move(toks)).module();
    for (ByteRange c : comments) insert_comment(root, c);
    return root;
}

std::vector<SyntaxRecord> to_records(const SyntaxNode& root) {
    std::vector<SyntaxRecord> out;
    flatten(root, 0, out);
    return out;
}

std::vector<SyntaxRecord> toy_records(std::string_view source) { return to_records(parse_toy(source)); }

std::vector<SyntaxRecord> ToyBackend::parse(Language lang, std::string_view source) const {
    if (lang != Language::Toy)
        throw ConfigError("toy backend cannot parse '" + std::string(language_name(lang)) + "'");
    return toy_records(source);
}

}  // namespace astprep
