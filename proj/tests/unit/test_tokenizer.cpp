#include "astprep/errors.hpp"
#include "astprep/tokenizer.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

namespace fs = std::filesystem;
using namespace astprep;
using astprep::testing::scratch_dir;
using astprep::testing::write_file;

namespace {

std::string slice(const TokenizedFile& t, std::size_t i) {
    return t.source.substr(t.offsets[i].start, t.offsets[i].size());
}

void check_tiling(const TokenizedFile& t, std::string_view source) {
    REQUIRE(t.ids.size() == t.offsets.size());
    std::string joined;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.offsets[i].start == pos);
        CHECK(t.offsets[i].end > t.offsets[i].start);
        pos = t.offsets[i].end;
        joined += slice(t, i);
    }
    CHECK(joined == source);
}

VocabSpec fact_vocab() {
    return VocabSpec::byte_level({{"f", "a"}, {"fa", "c"}, {"fac", "t"}, {"o", "r"}, {"or", "i"}, {"ori", "a"},
                                  {"oria", "l"}});
}

}  // namespace

TEST_CASE("byte vocabulary covers every byte") {
    VocabSpec v = VocabSpec::byte_level();
    CHECK(v.content_size() == 256);
    CHECK(v.sentinel_count() == 100);
    CHECK(v.sentinel_base_id() == 256);
    CHECK(v.total_size() == 356);
    for (int b = 0; b < 256; ++b) CHECK(v.token_bytes(v.byte_id(static_cast<unsigned char>(b))) == std::string(1, char(b)));
    CHECK(v.is_sentinel(256));
    CHECK(v.is_sentinel(355));
    CHECK_FALSE(v.is_sentinel(255));
    CHECK_FALSE(v.is_sentinel(356));
    CHECK_THROWS_AS(v.sentinel(100), CapacityError);
}

TEST_CASE("empty input tokenizes to nothing") {
    TokenizedFile t = tokenize(VocabSpec::byte_level(), "");
    CHECK(t.ids.empty());
    CHECK(t.offsets.empty());
}

TEST_CASE("merge-free vocabulary falls back to bytes") {
    TokenizedFile t = tokenize(VocabSpec::byte_level(), "abc d\n!");
    REQUIRE(t.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(t.offsets[i].start == i);
        CHECK(t.offsets[i].end == i + 1);
    }
}

TEST_CASE("factorial splits into fact and orial") {
    VocabSpec v = fact_vocab();
    TokenizedFile t = tokenize(v, "factorial");
    REQUIRE(t.size() == 2);
    CHECK(t.ids[0] == *v.find("fact"));
    CHECK(t.ids[1] == *v.find("orial"));
    CHECK(t.offsets[0] == ByteRange{0, 4});
    CHECK(t.offsets[1] == ByteRange{4, 9});
}

TEST_CASE("merge priority follows rule order") {
    // "abc": with (b,c) ranked before (a,b) the result is a|bc.
    VocabSpec v = VocabSpec::byte_level({{"b", "c"}, {"a", "b"}});
    TokenizedFile t = tokenize(v, "abc");
    REQUIRE(t.size() == 2);
    CHECK(slice(t, 0) == "a");
    CHECK(slice(t, 1) == "bc");
    VocabSpec w = VocabSpec::byte_level({{"a", "b"}, {"b", "c"}});
    TokenizedFile u = tokenize(w, "abc");
    REQUIRE(u.size() == 2);
    CHECK(slice(u, 0) == "ab");
}

TEST_CASE("merges never cross pretokenizer pieces") {
    VocabSpec v = VocabSpec::byte_level({{"a", " "}, {" ", "b"}});
    TokenizedFile t = tokenize(v, "a b");
    REQUIRE(t.size() == 2);
    CHECK(slice(t, 0) == "a");
    CHECK(slice(t, 1) == " b");
}

TEST_CASE("pretokenizer keeps the last space with the following word") {
    std::string s = "x   = 1";
    std::vector<ByteRange> pieces = pretokenize(s);
    std::vector<std::string> got;
    for (ByteRange r : pieces) got.push_back(s.substr(r.start, r.size()));
    CHECK(got == std::vector<std::string>{"x", "  ", " =", " 1"});
    CHECK(pretokenize("").empty());
}

TEST_CASE("round trip on arbitrary bytes") {
    VocabSpec v = load_vocab(ASTPREP_VOCAB_DIR);
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::string s;
        const auto len = rng.below(200);
        for (std::uint64_t i = 0; i < len; ++i) {
            // Bias towards code-like ASCII but include every byte.
            s.push_back(rng.below(4) == 0 ? static_cast<char>(rng.below(256)) : "def return x\n  ()=:"[rng.below(19)]);
        }
        TokenizedFile t = tokenize(v, s);
        check_tiling(t, s);
        CHECK(detokenize(v, t.ids) == s);
        TokenizedFile again = tokenize(v, s);
        CHECK(again.ids == t.ids);
    }
}

TEST_CASE("shipped vocabulary loads and merges keywords") {
    VocabSpec v = load_vocab(ASTPREP_VOCAB_DIR);
    CHECK(v.content_size() > 256);
    TokenizedFile t = tokenize(v, "def f():\n    return factorial");
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < t.size(); ++i) parts.push_back(slice(t, i));
    CHECK(parts.front() == "def");
    CHECK(std::find(parts.begin(), parts.end(), " return") != parts.end());
    CHECK(std::find(parts.begin(), parts.end(), "orial") != parts.end());
}

TEST_CASE("save and load preserve the vocabulary") {
    VocabSpec v = fact_vocab();
    fs::path dir = scratch_dir("vocab");
    save_vocab(v, dir);
    VocabSpec back = load_vocab(dir);
    CHECK(back.content_size() == v.content_size());
    CHECK(back.merges() == v.merges());
    for (TokenId id = 0; id < static_cast<TokenId>(v.content_size()); ++id) CHECK(back.token_bytes(id) == v.token_bytes(id));
    fs::remove_all(dir);
}

TEST_CASE("escapes round trip") {
    for (int b = 0; b < 256; ++b) {
        std::string raw(1, static_cast<char>(b));
        CHECK(unescape_token(escape_token(raw)) == raw);
    }
    CHECK(unescape_token("a\\\\b") == "a\\b");
    CHECK_THROWS_AS(unescape_token("\\x4"), ParseError);
    CHECK_THROWS_AS(unescape_token("\\q"), ParseError);
}

TEST_CASE("load_vocab rejects malformed files") {
    fs::path dir = scratch_dir("badvocab");
    save_vocab(VocabSpec::byte_level(), dir);
    std::string good = astprep::testing::read_file(dir / "vocab.tsv");

    SUBCASE("duplicate token") {
        write_file(dir / "vocab.tsv", good + "a\t256\n");
        CHECK_THROWS_AS(load_vocab(dir), ValidationError);
    }
    SUBCASE("missing tab names the line") {
        write_file(dir / "vocab.tsv", good + "oops\n");
        try {
            load_vocab(dir);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 257);
        }
    }
    SUBCASE("non-numeric id") {
        write_file(dir / "vocab.tsv", good + "ab\tx\n");
        CHECK_THROWS_AS(load_vocab(dir), ParseError);
    }
    SUBCASE("id gap") {
        write_file(dir / "vocab.tsv", good + "ab\t300\n");
        CHECK_THROWS_AS(load_vocab(dir), ValidationError);
    }
    SUBCASE("merge without product") {
        write_file(dir / "merges.txt", "a b\n");
        CHECK_THROWS_AS(load_vocab(dir), ValidationError);
    }
    SUBCASE("merge line with one field") {
        write_file(dir / "merges.txt", "#version: 0.2\nab\n");
        try {
            load_vocab(dir);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("missing byte") {
        std::string without_a;
        std::istringstream in(good);
        for (std::string line; std::getline(in, line);)
            if (line.rfind("a\t", 0) != 0) without_a += line + "\n";
        write_file(dir / "vocab.tsv", without_a);
        CHECK_THROWS(load_vocab(dir));
    }
    fs::remove_all(dir);
}
