#include "astprep/errors.hpp"
#include "astprep/pipeline.hpp"
#include "astprep/toy_language.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace astprep;
using astprep::testing::read_file;
using astprep::testing::scratch_dir;
using astprep::testing::write_file;

namespace {

std::vector<ExampleRecord> read_records(const fs::path& p) {
    std::vector<ExampleRecord> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) out.push_back(from_json_line(line));
    return out;
}

PipelineConfig config_for(const fs::path& root, const fs::path& out) {
    PipelineConfig cfg;
    cfg.inputs = {root};
    cfg.output = out;
    cfg.seed = 17;
    return cfg;
}

std::string lines_of_tokens(int lines) {
    std::string s;
    for (int i = 0; i < lines; ++i) s += "x = 1\n";
    return s;
}

// Throws a non-library error for one file, standing in for an I/O failure.
class FlakyBackend final : public ParserBackend {
public:
    bool supports(Language lang) const override { return lang == Language::Toy; }
    std::vector<SyntaxRecord> parse(Language lang, std::string_view source) const override {
        if (source.find("explode") != std::string_view::npos) throw std::runtime_error("device error");
        return toy_.parse(lang, source);
    }
    std::unique_ptr<ParserBackend> clone() const override { return std::make_unique<FlakyBackend>(); }

private:
    ToyBackend toy_;
};

}  // namespace

TEST_CASE("config validation") {
    PipelineConfig cfg;
    cfg.inputs = {"."};
    CHECK_NOTHROW(cfg.validate());
    cfg.max_len = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.max_len = 2;
    cfg.workers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.workers = 1;
    cfg.inputs.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("default routing covers the listed extensions") {
    auto map = default_extension_map();
    CHECK(map.at(".py") == Language::Python);
    CHECK(map.at(".java") == Language::Java);
    CHECK(map.at(".c") == Language::C);
    CHECK(map.at(".h") == Language::C);
    CHECK(map.at(".cpp") == Language::Cpp);
    CHECK(map.at(".hpp") == Language::Cpp);
    CHECK(map.at(".cs") == Language::CSharp);
    CHECK(map.at(".md") == Language::Markdown);
    CHECK(map.at(".rst") == Language::ReStructuredText);
    CHECK_FALSE(is_code(Language::Markdown));
    CHECK(is_code(Language::Cpp));
}

TEST_CASE("record ids and JSON lines") {
    CHECK(record_id("a/b.py", 0) == record_id("a/b.py", 0));
    CHECK(record_id("a/b.py", 0) != record_id("a/b.py", 1));
    CHECK(record_id("a/b.py1", 0) != record_id("a/b.py", 10));
    CHECK(record_id("x", 3).size() == 16);

    ExampleRecord r;
    r.id = record_id("f.toy", 2);
    r.language = Language::Python;
    r.input_ids = {1, 2, 300};
    r.target_ids = {300, 9};
    r.meta = {3, 1, 42, 5};
    const std::string line = to_json_line(r);
    CHECK(line.rfind("{\"id\":", 0) == 0);
    CHECK(line.find("\"language\":\"python\",\"input_ids\":[1,2,300],\"target_ids\":[300,9],\"meta\":{") !=
          std::string::npos);
    CHECK(from_json_line(line) == r);
    r.meta.theta.reset();
    CHECK(to_json_line(r).find("\"theta\":null") != std::string::npos);
    CHECK(from_json_line(to_json_line(r)) == r);
    CHECK_THROWS_AS(from_json_line("{\"id\":"), IntegrityError);
    CHECK_THROWS_AS(from_json_line("{\"id\":\"x\"}"), IntegrityError);
}

TEST_CASE("a 10-token code file gives one record with no breaks") {
    fs::path dir = scratch_dir("ten");
    write_file(dir / "in" / "small.toy", "x = f(y1)\n");  // 10 tokens under a byte vocabulary
    VocabSpec v = VocabSpec::byte_level();
    PipelineConfig cfg = config_for(dir / "in", dir / "out.jsonl");
    CorpusStats s = run(cfg, v, ToyBackend());
    std::vector<ExampleRecord> recs = read_records(cfg.output);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].meta.n_chunk_tokens == 10);
    CHECK(recs[0].meta.seg_breaks == 0);
    CHECK(recs[0].meta.n_masked == 2);
    CHECK(recs[0].meta.theta.has_value());
    CHECK(recs[0].id == record_id("small.toy", 0));
    CHECK(s.records == 1);
    CHECK(s.languages.at("toy").files == 1);
    CHECK(s.languages.at("toy").tokens == 10);
    fs::remove_all(dir);
}

TEST_CASE("a 2,500-token code file gives three records") {
    fs::path dir = scratch_dir("big");
    std::string src = lines_of_tokens(416) + "y=1\n";
    REQUIRE(src.size() == 2500);
    write_file(dir / "in" / "big.toy", src);
    VocabSpec v = VocabSpec::byte_level();
    PipelineConfig cfg = config_for(dir / "in", dir / "out.jsonl");
    CorpusStats s = run(cfg, v, ToyBackend());
    std::vector<ExampleRecord> recs = read_records(cfg.output);
    REQUIRE(recs.size() == 3);
    std::int32_t total = 0;
    for (const ExampleRecord& r : recs) {
        CHECK(r.meta.n_chunk_tokens <= 1024);
        CHECK(r.input_ids.size() <= 1024);
        CHECK(r.meta.n_masked == mask_quota(r.meta.n_chunk_tokens, 0.25));
        total += r.meta.n_chunk_tokens;
    }
    CHECK(total == 2500);
    // Cuts fall between statements, so only the module root is broken.
    CHECK(recs[0].meta.seg_breaks == 1);
    CHECK(recs[1].meta.seg_breaks == 1);
    CHECK(recs[2].meta.seg_breaks == 0);
    CHECK(s.dp_breaks == 2);
    CHECK(s.dp_breaks <= s.greedy_breaks);

    // Decoding every record and concatenating restores the file.
    std::string restored;
    for (const ExampleRecord& r : recs) restored += detokenize(v, decode_sentinels({r.input_ids, r.target_ids}, v));
    CHECK(restored == src);
    fs::remove_all(dir);
}

TEST_CASE("routing, fallbacks and overrides") {
    fs::path dir = scratch_dir("route");
    Rng rng(1);
    write_file(dir / "in" / "a.toy", testing::random_toy_program(rng, 30));
    write_file(dir / "in" / "b.md", testing::random_markdown(rng, 40));
    write_file(dir / "in" / "c.toy", "def broken(:\n");
    write_file(dir / "in" / "d.txt", "ignored");
    write_file(dir / "in" / "sub" / "e.rst", testing::random_markdown(rng, 5));
    PipelineConfig cfg = config_for(dir / "in", dir / "out.jsonl");
    VocabSpec v = load_vocab(ASTPREP_VOCAB_DIR, required_sentinels(cfg));

    auto by_language = [&](const std::vector<ExampleRecord>& recs, Language lang) {
        std::vector<ExampleRecord> out;
        for (const auto& r : recs)
            if (r.language == lang) out.push_back(r);
        return out;
    };

    SUBCASE("auto") {
        CorpusStats s = run(cfg, v, ToyBackend());
        CHECK(s.parse_fallbacks == 1);
        CHECK(s.files.size() == 4);
        CHECK(s.files_skipped == 0);
        std::vector<ExampleRecord> recs = read_records(cfg.output);
        for (const auto& r : by_language(recs, Language::Markdown)) CHECK_FALSE(r.meta.theta);
        for (const auto& r : by_language(recs, Language::ReStructuredText)) CHECK_FALSE(r.meta.theta);
        for (const auto& r : recs) {
            if (r.language != Language::Toy) continue;
            const bool broken = r.id == record_id("c.toy", 0);
            CHECK(r.meta.theta.has_value() == !broken);
        }
        std::vector<std::string> paths;
        for (const FileStats& f : s.files) paths.push_back(f.path);
        CHECK(paths == std::vector<std::string>{"a.toy", "b.md", "c.toy", "sub/e.rst"});
    }
    SUBCASE("vanilla override applies to code") {
        cfg.corrupt = CorruptOverride::Vanilla;
        run(cfg, v, ToyBackend());
        for (const auto& r : read_records(cfg.output)) CHECK_FALSE(r.meta.theta);
    }
    SUBCASE("greedy segmentation") {
        cfg.segmentation = SegmentationMode::Greedy;
        cfg.max_len = 64;
        run(cfg, v, ToyBackend());
        for (const auto& r : read_records(cfg.output)) CHECK(r.meta.n_chunk_tokens <= 64);
        std::vector<ExampleRecord> toy = by_language(read_records(cfg.output), Language::Toy);
        for (std::size_t k = 0; k + 1 < toy.size(); ++k)
            if (toy[k + 1].id != record_id("c.toy", 0) && toy[k].id != record_id("c.toy", 0) &&
                toy[k + 1].id != record_id("a.toy", 0))
                CHECK(toy[k].meta.n_chunk_tokens == 64);
    }
    fs::remove_all(dir);
}

TEST_CASE("sentinel capacity") {
    PipelineConfig cfg;
    CHECK(required_sentinels(cfg) == 256);
    cfg.max_len = 64;
    CHECK(required_sentinels(cfg) == 100);

    // A 100-id block cannot hold fine-grained subtree masks of a long chunk;
    // the file is skipped and counted rather than silently re-masked.
    fs::path dir = scratch_dir("capacity");
    std::string src;
    for (int i = 0; i < 120; ++i) src += "v" + std::to_string(i) + " = a + b\n";
    write_file(dir / "in" / "wide.toy", src);
    cfg = config_for(dir / "in", dir / "out.jsonl");
    cfg.corruption.theta_min = cfg.corruption.theta_max = 5;
    CorpusStats small = run(cfg, VocabSpec::byte_level({}, 100), ToyBackend());
    CHECK(small.files_skipped == 1);
    CorpusStats sized = run(cfg, VocabSpec::byte_level({}, required_sentinels(cfg)), ToyBackend());
    CHECK(sized.files_skipped == 0);
    CHECK(sized.records == 2);
    fs::remove_all(dir);
}

TEST_CASE("output is independent of the worker count") {
    fs::path dir = scratch_dir("det");
    Rng rng(2);
    for (int i = 0; i < 12; ++i) {
        write_file(dir / "in" / ("f" + std::to_string(i) + ".toy"), testing::random_toy_program(rng, 5 + i * 3));
        write_file(dir / "in" / ("n" + std::to_string(i) + ".md"), testing::random_markdown(rng, 3 + i));
    }
    PipelineConfig cfg = config_for(dir / "in", dir / "one.jsonl");
    cfg.max_len = 128;
    VocabSpec v = load_vocab(ASTPREP_VOCAB_DIR, required_sentinels(cfg));
    CorpusStats one = run(cfg, v, ToyBackend());
    cfg.workers = 5;
    cfg.output = dir / "five.jsonl";
    CorpusStats five = run(cfg, v, ToyBackend());
    CHECK(read_file(dir / "one.jsonl") == read_file(dir / "five.jsonl"));
    CHECK(one.to_json(false) == five.to_json(false));
    cfg.seed = 18;
    cfg.output = dir / "other.jsonl";
    run(cfg, v, ToyBackend());
    CHECK(read_file(dir / "one.jsonl") != read_file(dir / "other.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("stats on the nested-class file") {
    fs::path dir = scratch_dir("nested");
    write_file(dir / "nested.toy", testing::nested_class_source());
    PipelineConfig cfg;
    cfg.inputs = {dir / "nested.toy"};
    cfg.max_len = testing::kNestedClassMaxLen;
    CorpusStats s = stats(cfg, VocabSpec::byte_level(), *testing::nested_class_backend());
    CHECK(s.greedy_breaks == 9);
    CHECK(s.dp_breaks == 3);
    CHECK(s.records == 0);
    REQUIRE(s.files.size() == 1);
    CHECK(s.files[0].segmentation.k_chosen == 3);
    CHECK(s.to_json().find("\"dp_runtime_micros\"") != std::string::npos);
    CHECK(s.to_json(false).find("\"dp_runtime_micros\"") == std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("failing files are skipped and counted") {
    fs::path dir = scratch_dir("skip");
    write_file(dir / "in" / "good.toy", "x = 1\n");
    write_file(dir / "in" / "bad.toy", "explode = 1\n");
    PipelineConfig cfg = config_for(dir / "in", dir / "out.jsonl");
    CorpusStats s = run(cfg, VocabSpec::byte_level(), FlakyBackend());
    CHECK(s.files_skipped == 1);
    CHECK(s.files.size() == 1);
    CHECK(read_records(cfg.output).size() == 1);

    cfg.output = dir / "missing" / "dir" / "out.jsonl";
    CHECK_THROWS_AS(run(cfg, VocabSpec::byte_level(), ToyBackend()), Error);
    cfg.inputs = {dir / "nope"};
    cfg.output = dir / "out2.jsonl";
    CHECK_THROWS_AS(run(cfg, VocabSpec::byte_level(), ToyBackend()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("inspect") {
    fs::path dir = scratch_dir("inspect");
    write_file(dir / "in" / "tiny.toy", "x\n");  // 2 tokens, quota 0
    write_file(dir / "in" / "more.toy", lines_of_tokens(20));
    VocabSpec v = VocabSpec::byte_level();
    PipelineConfig cfg = config_for(dir / "in", dir / "out.jsonl");
    run(cfg, v, ToyBackend());

    std::string tiny = inspect(cfg.output, record_id("tiny.toy", 0), v);
    CHECK(tiny.find("<extra_id_") == std::string::npos);
    CHECK(tiny.find("--- input ---\nx\n\n--- target ---\n\n") != std::string::npos);

    std::string more = inspect(cfg.output, record_id("more.toy", 0), v);
    CHECK(more.find("<extra_id_0>") != std::string::npos);
    CHECK_THROWS_AS(inspect(cfg.output, "0000000000000000", v), NotFoundError);
    CHECK_THROWS_AS(inspect(dir / "absent.jsonl", "x", v), NotFoundError);

    // Three masked runs render three markers in order.
    ExampleRecord r;
    r.id = "three-runs";
    std::vector<TokenId> ids;
    for (char c : std::string("return n * fact(n - 1)")) ids.push_back(v.byte_id(static_cast<unsigned char>(c)));
    CorruptedExample ex = encode_sentinels(ids, CorruptionMask({7, 11, 12, 13, 14, 18}), v);
    r.input_ids = ex.input_ids;
    r.target_ids = ex.target_ids;
    std::string shown = render_record(r, v);
    const auto a = shown.find("<extra_id_0>"), b = shown.find("<extra_id_1>"), c = shown.find("<extra_id_2>");
    REQUIRE(c != std::string::npos);
    CHECK(a < b);
    CHECK(b < c);
    CHECK(shown.find("return <extra_id_0> * <extra_id_1>(n <extra_id_2> 1)") != std::string::npos);
    CHECK(shown.find("<extra_id_0>n<extra_id_1>fact<extra_id_2>-") != std::string::npos);

    // A corrupted row surfaces as an integrity error.
    std::string data = read_file(cfg.output);
    ExampleRecord victim = find_record(cfg.output, record_id("more.toy", 0));
    const std::string good = to_json_line(victim);
    victim.target_ids.erase(victim.target_ids.begin());
    const std::size_t at = data.find(good);
    REQUIRE(at != std::string::npos);
    data.replace(at, good.size(), to_json_line(victim));
    write_file(cfg.output, data);
    CHECK_THROWS_AS(inspect(cfg.output, record_id("more.toy", 0), v), IntegrityError);
    r.input_ids.push_back(99999);
    CHECK_THROWS_AS(render_record(r, v), IntegrityError);
    fs::remove_all(dir);
}

TEST_CASE("corrupt_chunk is a pure function of its key") {
    SpanTree t = testing::random_span_tree(*std::make_unique<Rng>(3), 200);
    VocabSpec v = VocabSpec::byte_level();
    std::vector<TokenId> ids(200);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i % 256);
    CorruptionConfig cfg;
    Rng a = chunk_rng(5, "x.toy", 1), b = chunk_rng(5, "x.toy", 1), c = chunk_rng(5, "x.toy", 2);
    std::optional<std::int32_t> theta;
    std::int32_t masked = 0;
    CorruptedExample ea = corrupt_chunk(ids, &t, cfg, v, a, &theta, &masked);
    CHECK(theta.has_value());
    CHECK(masked == 50);
    CHECK(corrupt_chunk(ids, &t, cfg, v, b) == ea);
    CHECK(corrupt_chunk(ids, &t, cfg, v, c) != ea);
    Rng d = chunk_rng(5, "x.toy", 1);
    CorruptedExample vanilla = corrupt_chunk(ids, nullptr, cfg, v, d, &theta, &masked);
    CHECK_FALSE(theta.has_value());
    CHECK(masked == 50);
    CHECK(decode_sentinels(vanilla, v) == ids);
}
