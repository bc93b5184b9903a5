#pragma once

#include "astprep/ast_parse.hpp"
#include "astprep/corruptor.hpp"
#include "astprep/language.hpp"
#include "astprep/segmenter.hpp"
#include "astprep/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace astprep {

enum class SegmentationMode { Ast, Greedy };
/// Auto corrupts code by subtree and text with vanilla spans; an explicit
/// mode applies to code files only, text never has a tree to mask.
enum class CorruptOverride { Auto, Subtree, Vanilla };

std::map<std::string, Language> default_extension_map();

struct PipelineConfig {
    std::vector<std::filesystem::path> inputs;
    std::map<std::string, Language> extensions = default_extension_map();
    std::int32_t max_len = 1024;
    CorruptionConfig corruption;
    SegmentationMode segmentation = SegmentationMode::Ast;
    CorruptOverride corrupt = CorruptOverride::Auto;
    std::uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path output;
    std::optional<std::filesystem::path> grammar_dir;

    /// Throws ConfigError.
    void validate() const;
};

/// Sentinel block size that makes capacity errors impossible: a chunk never
/// masks more than mask_quota(max_len, r) tokens, hence never has more runs.
int required_sentinels(const PipelineConfig& cfg);

struct ExampleMeta {
    std::int32_t n_chunk_tokens = 0;
    std::int32_t n_masked = 0;
    std::optional<std::int32_t> theta;  ///< absent for vanilla corruption
    std::int64_t seg_breaks = 0;        ///< breaks caused by the cut ending this chunk
    friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

struct ExampleRecord {
    std::string id;
    Language language = Language::Toy;
    std::vector<TokenId> input_ids;
    std::vector<TokenId> target_ids;
    ExampleMeta meta;
    friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

/// 16 hex digits of a 64-bit hash of (path, chunk index).
std::string record_id(std::string_view path, std::int32_t chunk_index);

/// One compact JSON object with keys id, language, input_ids, target_ids, meta.
std::string to_json_line(const ExampleRecord& record);
/// Throws IntegrityError on malformed input.
ExampleRecord from_json_line(std::string_view line);

/// Mask and sentinel-encode one chunk. A null tree selects vanilla spans;
/// otherwise theta is drawn from `rng` and the tree is masked by subtree.
/// Both draw only from `rng`, so equal keys give equal examples.
CorruptedExample corrupt_chunk(std::span<const TokenId> ids, const SpanTree* chunk_tree, const CorruptionConfig& cfg,
                               const VocabSpec& vocab, Rng& rng, std::optional<std::int32_t>* theta_out = nullptr,
                               std::int32_t* masked_out = nullptr);

/// Stream key of chunk `chunk_index` of the file at `path`.
Rng chunk_rng(std::uint64_t seed, std::string_view path, std::int32_t chunk_index);

struct FileStats {
    std::string path;
    Language language = Language::Toy;
    SegmentStats segmentation;  ///< zero for text and fallback files
    bool parsed = false;
};

struct LanguageStats {
    std::int64_t files = 0;
    std::int64_t tokens = 0;
    std::int64_t records = 0;
};

struct CorpusStats {
    std::map<std::string, LanguageStats> languages;
    std::int64_t greedy_breaks = 0;
    std::int64_t dp_breaks = 0;
    std::int64_t records = 0;
    std::int64_t files_skipped = 0;
    std::int64_t parse_fallbacks = 0;
    std::vector<FileStats> files;

    /// Deterministic part as JSON; with `timings`, adds DP runtime percentiles.
    std::string to_json(bool timings = true) const;
};

struct FileInput {
    std::string path;
    Language language = Language::Toy;
    std::string bytes;
};

struct FileOutcome {
    std::vector<ExampleRecord> records;
    FileStats stats;
    std::int64_t tokens = 0;
};

/// Tokenize, parse, segment and corrupt one file. Code files whose parse fails
/// fall back to greedy chunks with vanilla corruption (stats.parsed == false).
FileOutcome process_file(const FileInput& file, const PipelineConfig& cfg, const VocabSpec& vocab,
                         const ParserBackend& backend, bool emit_records = true);

/// Files under cfg.inputs with a routed extension, sorted by path.
std::vector<FileInput> discover_files(const PipelineConfig& cfg);

/// Writes one JSON line per chunk to cfg.output, ordered by (path, chunk).
/// Unreadable files are logged and counted in files_skipped.
CorpusStats run(const PipelineConfig& cfg, const VocabSpec& vocab);
CorpusStats run(const PipelineConfig& cfg, const VocabSpec& vocab, const ParserBackend& backend);

/// Break accounting only; nothing is written.
CorpusStats stats(const PipelineConfig& cfg, const VocabSpec& vocab);
CorpusStats stats(const PipelineConfig& cfg, const VocabSpec& vocab, const ParserBackend& backend);

/// Finds record `id` in a dataset file. Throws NotFoundError or IntegrityError.
ExampleRecord find_record(const std::filesystem::path& dataset, std::string_view id);

/// Text rendering with sentinels shown as <extra_id_N>; verifies the record
/// decodes before rendering.
std::string render_record(const ExampleRecord& record, const VocabSpec& vocab);

inline std::string inspect(const std::filesystem::path& dataset, std::string_view id, const VocabSpec& vocab) {
    return render_record(find_record(dataset, id), vocab);
}

}  // namespace astprep
