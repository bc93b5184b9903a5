#include "astprep/tokenizer.hpp"

#include "astprep/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace astprep {

namespace {

std::uint64_t pair_key(TokenId left, TokenId right) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) |
           static_cast<std::uint32_t>(right);
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 are grouped with letters so UTF-8 sequences stay in one piece.
bool is_letter(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

bool is_punct(unsigned char c) { return !is_space(c) && !is_letter(c) && !is_digit(c); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(line, ++line_no);
        pos = eol + 1;
    }
}

}  // namespace

std::string escape_token(std::string_view raw) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        if (c > 0x20 && c < 0x7f && c != '\\') {
            out.push_back(static_cast<char>(c));
        } else {
            out += "\\x";
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

std::string unescape_token(std::string_view escaped, std::size_t line) {
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c != '\\') {
            out.push_back(c);
            continue;
        }
        if (i + 1 < escaped.size() && escaped[i + 1] == '\\') {
            out.push_back('\\');
            ++i;
            continue;
        }
        if (i + 3 < escaped.size() && escaped[i + 1] == 'x') {
            int hi = hex_value(escaped[i + 2]);
            int lo = hex_value(escaped[i + 3]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 3;
                continue;
            }
        }
        throw ParseError("invalid escape sequence in token '" + std::string(escaped) + "'", line);
    }
    return out;
}

VocabSpec VocabSpec::from_entries(std::vector<std::pair<std::string, TokenId>> entries,
                                  std::vector<MergeRule> merges, int sentinel_count) {
    if (sentinel_count < 0) throw ValidationError("sentinel_count must be non-negative");
    VocabSpec v;
    v.sentinel_count_ = sentinel_count;
    v.id_to_token_.resize(entries.size());
    std::vector<bool> seen(entries.size(), false);
    v.token_to_id_.reserve(entries.size());
    for (auto& [token, id] : entries) {
        if (id < 0 || static_cast<std::size_t>(id) >= entries.size())
            throw ValidationError("token id " + std::to_string(id) + " outside dense range [0, " +
                                  std::to_string(entries.size()) + ")");
        if (seen[id]) throw ValidationError("duplicate token id " + std::to_string(id));
        if (token.empty()) throw ValidationError("empty token for id " + std::to_string(id));
        if (!v.token_to_id_.emplace(token, id).second)
            throw ValidationError("duplicate token '" + escape_token(token) + "'");
        seen[id] = true;
        v.id_to_token_[id] = std::move(token);
    }
    for (int b = 0; b < 256; ++b) {
        auto it = v.token_to_id_.find(std::string(1, static_cast<char>(b)));
        if (it == v.token_to_id_.end())
            throw ValidationError("single-byte token '" + escape_token(std::string(1, char(b))) +
                                  "' missing from vocabulary");
        v.byte_ids_[b] = it->second;
    }
    v.merges_ = std::move(merges);
    v.index_merges();
    return v;
}

void VocabSpec::index_merges() {
    merge_table_.clear();
    merge_table_.reserve(merges_.size());
    for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
        const auto& m = merges_[rank];
        auto l = find(m.left);
        auto r = find(m.right);
        auto merged = find(m.left + m.right);
        if (!l || !r || !merged)
            throw ValidationError("merge rule '" + escape_token(m.left) + " " +
                                  escape_token(m.right) + "' references tokens missing from vocabulary");
        // Earlier rules win when a pair is listed twice.
        merge_table_.try_emplace(pair_key(*l, *r), MergeResult{static_cast<std::uint32_t>(rank), *merged});
    }
}

VocabSpec VocabSpec::byte_level(std::vector<MergeRule> merges, int sentinel_count) {
    std::vector<std::pair<std::string, TokenId>> entries;
    std::unordered_map<std::string, TokenId> known;
    for (int b = 0; b < 256; ++b) {
        entries.emplace_back(std::string(1, static_cast<char>(b)), b);
        known.emplace(entries.back().first, b);
    }
    for (const auto& m : merges) {
        std::string merged = m.left + m.right;
        if (known.count(merged)) continue;
        auto id = static_cast<TokenId>(entries.size());
        known.emplace(merged, id);
        entries.emplace_back(std::move(merged), id);
    }
    return from_entries(std::move(entries), std::move(merges), sentinel_count);
}

TokenId VocabSpec::sentinel(int index) const {
    if (index < 0 || index >= sentinel_count_)
        throw CapacityError("sentinel index " + std::to_string(index) + " exceeds sentinel_count " +
                            std::to_string(sentinel_count_));
    return sentinel_base_id() + index;
}

std::optional<TokenId> VocabSpec::find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& VocabSpec::token_bytes(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw std::out_of_range("token id " + std::to_string(id) + " is not a content token");
    return id_to_token_[id];
}

std::optional<VocabSpec::MergeResult> VocabSpec::lookup_merge(TokenId left, TokenId right) const {
    auto it = merge_table_.find(pair_key(left, right));
    if (it == merge_table_.end()) return std::nullopt;
    return it->second;
}

VocabSpec load_vocab(const std::filesystem::path& path, int sentinel_count) {
    if (std::filesystem::is_directory(path))
        return load_vocab(path / "vocab.tsv", path / "merges.txt", sentinel_count);
    return load_vocab(path, path.parent_path() / "merges.txt", sentinel_count);
}

VocabSpec load_vocab(const std::filesystem::path& token_map, const std::filesystem::path& merges_path,
                     int sentinel_count) {
    std::vector<std::pair<std::string, TokenId>> entries;
    for_each_line(read_file(token_map), [&](std::string_view line, std::size_t no) {
        if (line.empty()) return;
        auto tab = line.rfind('\t');
        if (tab == std::string_view::npos || tab == 0)
            throw ParseError(token_map.string() + ": expected 'token<TAB>id'", no);
        std::string_view id_text = line.substr(tab + 1);
        if (id_text.empty() || !std::all_of(id_text.begin(), id_text.end(),
                                            [](char c) { return c >= '0' && c <= '9'; }))
            throw ParseError(token_map.string() + ": invalid id '" + std::string(id_text) + "'", no);
        long long id = std::stoll(std::string(id_text));
        if (id > INT32_MAX) throw ParseError(token_map.string() + ": id out of range", no);
        entries.emplace_back(unescape_token(line.substr(0, tab), no), static_cast<TokenId>(id));
    });

    std::vector<MergeRule> merges;
    if (std::filesystem::exists(merges_path)) {
        for_each_line(read_file(merges_path), [&](std::string_view line, std::size_t no) {
            if (line.empty() || line.starts_with("#version")) return;
            auto sp = line.find(' ');
            if (sp == std::string_view::npos || sp == 0 || sp + 1 == line.size() ||
                line.find(' ', sp + 1) != std::string_view::npos)
                throw ParseError(merges_path.string() + ": expected 'left right'", no);
            merges.push_back({unescape_token(line.substr(0, sp), no), unescape_token(line.substr(sp + 1), no)});
        });
    }
    return VocabSpec::from_entries(std::move(entries), std::move(merges), sentinel_count);
}

void save_vocab(const VocabSpec& vocab, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    std::ofstream tokens(directory / "vocab.tsv", std::ios::binary);
    for (std::size_t id = 0; id < vocab.content_size(); ++id)
        tokens << escape_token(vocab.token_bytes(static_cast<TokenId>(id))) << '\t' << id << '\n';
    std::ofstream merges(directory / "merges.txt", std::ios::binary);
    for (const auto& m : vocab.merges()) merges << escape_token(m.left) << ' ' << escape_token(m.right) << '\n';
    if (!tokens || !merges) throw Error("failed writing vocabulary to " + directory.string());
}

std::vector<ByteRange> pretokenize(std::string_view s) {
    std::vector<ByteRange> pieces;
    const std::size_t n = s.size();
    std::size_t i = 0;
    auto u = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    auto run = [&](std::size_t k, bool (*cls)(unsigned char)) {
        while (k < n && cls(u(k))) ++k;
        return k;
    };
    while (i < n) {
        std::size_t start = i;
        std::size_t body = i;
        // An optional single leading space attaches to the following word.
        if (u(i) == ' ' && i + 1 < n && !is_space(u(i + 1))) body = i + 1;
        unsigned char c = u(body);
        if (is_space(c)) {
            std::size_t j = run(body, is_space);
            // Leave one trailing space for the next piece, as in "\s+(?!\S)".
            if (j < n && j - start > 1 && s[j - 1] == ' ') --j;
            pieces.push_back({start, j});
            i = j;
            continue;
        }
        std::size_t j = is_letter(c) ? run(body, is_letter) : is_digit(c) ? run(body, is_digit) : run(body, is_punct);
        pieces.push_back({start, j});
        i = j;
    }
    return pieces;
}

namespace {

struct Symbol {
    TokenId id;
    int prev;
    int next;
    std::size_t start;
    std::size_t end;
};

struct Candidate {
    std::uint32_t rank;
    int left;
    int right;
    TokenId left_id;
    TokenId right_id;
    bool operator>(const Candidate& o) const {
        return rank != o.rank ? rank > o.rank : left > o.left;
    }
};

void encode_piece(const VocabSpec& vocab, std::string_view source, ByteRange piece, TokenizedFile& out) {
    std::vector<Symbol> sym;
    sym.reserve(piece.size());
    for (std::size_t b = piece.start; b < piece.end; ++b) {
        int idx = static_cast<int>(sym.size());
        sym.push_back({vocab.byte_id(static_cast<unsigned char>(source[b])), idx - 1, idx + 1, b, b + 1});
    }
    sym.back().next = -1;

    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
    auto consider = [&](int left) {
        if (left < 0) return;
        int right = sym[left].next;
        if (right < 0) return;
        if (auto m = vocab.lookup_merge(sym[left].id, sym[right].id))
            heap.push({m->rank, left, right, sym[left].id, sym[right].id});
    };
    for (int k = 0; k + 1 < static_cast<int>(sym.size()); ++k) consider(k);

    while (!heap.empty()) {
        Candidate c = heap.top();
        heap.pop();
        Symbol& l = sym[c.left];
        if (l.id < 0 || l.next != c.right || l.id != c.left_id || sym[c.right].id != c.right_id) continue;
        Symbol& r = sym[c.right];
        l.id = vocab.lookup_merge(c.left_id, c.right_id)->merged;
        l.end = r.end;
        l.next = r.next;
        if (r.next >= 0) sym[r.next].prev = c.left;
        r.id = -1;
        consider(l.prev);
        consider(c.left);
    }
    for (int k = 0; k >= 0; k = sym[k].next) {
        out.ids.push_back(sym[k].id);
        out.offsets.push_back({sym[k].start, sym[k].end});
    }
}

}  // namespace

TokenizedFile tokenize(const VocabSpec& vocab, std::string_view source) {
    TokenizedFile out;
    out.source.assign(source);
    out.ids.reserve(source.size() / 3 + 1);
    out.offsets.reserve(source.size() / 3 + 1);
    for (ByteRange piece : pretokenize(source)) encode_piece(vocab, source, piece, out);
    return out;
}

std::string detokenize(const VocabSpec& vocab, std::span<const TokenId> ids) {
    std::string out;
    for (TokenId id : ids) out += vocab.token_bytes(id);
    return out;
}

}  // namespace astprep
