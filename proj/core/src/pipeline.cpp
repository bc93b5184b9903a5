#include "astprep/pipeline.hpp"

#include "astprep/errors.hpp"
#include "astprep/tree_sitter_backend.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace astprep {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::map<std::string, Language> default_extension_map() {
    return {
        {".py", Language::Python},  {".java", Language::Java},  {".c", Language::C},
        {".h", Language::C},        {".cpp", Language::Cpp},    {".hpp", Language::Cpp},
        {".cc", Language::Cpp},     {".cxx", Language::Cpp},    {".hh", Language::Cpp},
        {".cs", Language::CSharp},  {".md", Language::Markdown}, {".rst", Language::ReStructuredText},
        {".toy", Language::Toy},
    };
}

void PipelineConfig::validate() const {
    if (max_len < 2) throw ConfigError("max_len must be at least 2, got " + std::to_string(max_len));
    if (workers < 1) throw ConfigError("worker count must be at least 1, got " + std::to_string(workers));
    if (inputs.empty()) throw ConfigError("no input roots given");
    corruption.validate();
}

int required_sentinels(const PipelineConfig& cfg) {
    return std::max(kDefaultSentinelCount, mask_quota(cfg.max_len, cfg.corruption.mask_ratio));
}

std::string record_id(std::string_view path, std::int32_t chunk_index) {
    std::string key(path);
    key.push_back('\0');
    key += std::to_string(chunk_index);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
    return buf;
}

std::string to_json_line(const ExampleRecord& record) {
    json meta;
    meta["n_chunk_tokens"] = record.meta.n_chunk_tokens;
    meta["n_masked"] = record.meta.n_masked;
    meta["theta"] = record.meta.theta ? json(*record.meta.theta) : json(nullptr);
    meta["seg_breaks"] = record.meta.seg_breaks;
    json j;
    j["id"] = record.id;
    j["language"] = std::string(language_name(record.language));
    j["input_ids"] = record.input_ids;
    j["target_ids"] = record.target_ids;
    j["meta"] = std::move(meta);
    return j.dump();
}

ExampleRecord from_json_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IntegrityError(std::string("malformed record: ") + e.what());
    }
    try {
        ExampleRecord r;
        r.id = j.at("id").get<std::string>();
        auto lang = language_from_name(j.at("language").get<std::string>());
        if (!lang) throw IntegrityError("record " + r.id + " has unknown language");
        r.language = *lang;
        r.input_ids = j.at("input_ids").get<std::vector<TokenId>>();
        r.target_ids = j.at("target_ids").get<std::vector<TokenId>>();
        const json& meta = j.at("meta");
        r.meta.n_chunk_tokens = meta.at("n_chunk_tokens").get<std::int32_t>();
        r.meta.n_masked = meta.at("n_masked").get<std::int32_t>();
        if (!meta.at("theta").is_null()) r.meta.theta = meta.at("theta").get<std::int32_t>();
        r.meta.seg_breaks = meta.at("seg_breaks").get<std::int64_t>();
        return r;
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed record: ") + e.what());
    }
}

Rng chunk_rng(std::uint64_t seed, std::string_view path, std::int32_t chunk_index) {
    return Rng::keyed(seed, fnv1a64(path), static_cast<std::uint64_t>(chunk_index));
}

CorruptedExample corrupt_chunk(std::span<const TokenId> ids, const SpanTree* chunk_tree, const CorruptionConfig& cfg,
                               const VocabSpec& vocab, Rng& rng, std::optional<std::int32_t>* theta_out,
                               std::int32_t* masked_out) {
    const auto n = static_cast<std::int32_t>(ids.size());
    CorruptionMask mask;
    std::optional<std::int32_t> theta;
    if (chunk_tree) {
        if (chunk_tree->token_count() != n) throw std::invalid_argument("chunk tree does not match chunk length");
        theta = sample_theta(rng, cfg);
        mask = mask_subtree(*chunk_tree, mask_quota(n, cfg.mask_ratio), *theta, rng);
    } else {
        mask = mask_vanilla(n, cfg, rng);
    }
    if (theta_out) *theta_out = theta;
    if (masked_out) *masked_out = static_cast<std::int32_t>(mask.size());
    return encode_sentinels(ids, mask, vocab);
}

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error("read failed for " + p.string());
    return std::move(buf).str();
}

struct Origin {
    fs::path full;
    std::string rel;
    Language language;
};

std::vector<Origin> discover(const PipelineConfig& cfg) {
    std::vector<Origin> out;
    auto route = [&](const fs::path& p) -> std::optional<Language> {
        auto it = cfg.extensions.find(p.extension().string());
        if (it == cfg.extensions.end()) return std::nullopt;
        return it->second;
    };
    for (const fs::path& root : cfg.inputs) {
        std::error_code ec;
        if (fs::is_regular_file(root, ec)) {
            if (auto lang = route(root)) out.push_back({root, root.filename().generic_string(), *lang});
            continue;
        }
        if (!fs::is_directory(root, ec)) throw ConfigError("input root does not exist: " + root.string());
        for (fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
             it != end; it.increment(ec)) {
            if (ec) break;
            if (!it->is_regular_file(ec)) continue;
            if (auto lang = route(it->path()))
                out.push_back({it->path(), fs::relative(it->path(), root).generic_string(), *lang});
        }
    }
    std::sort(out.begin(), out.end(), [](const Origin& a, const Origin& b) { return a.rel < b.rel; });
    return out;
}

bool subtree_corruption(Language lang, CorruptOverride mode) {
    if (!is_code(lang)) return false;
    return mode != CorruptOverride::Vanilla;
}

enum class Slot { Pending, Done, Skipped };

struct Job {
    Origin origin;
    FileOutcome outcome;
    Slot state = Slot::Pending;
};

void accumulate(CorpusStats& stats, const FileOutcome& outcome) {
    LanguageStats& lang = stats.languages[std::string(language_name(outcome.stats.language))];
    ++lang.files;
    lang.tokens += outcome.tokens;
    lang.records += static_cast<std::int64_t>(outcome.records.size());
    stats.records += static_cast<std::int64_t>(outcome.records.size());
    if (outcome.stats.parsed) {
        stats.greedy_breaks += outcome.stats.segmentation.greedy_breaks;
        stats.dp_breaks += outcome.stats.segmentation.dp_breaks;
    } else if (is_code(outcome.stats.language)) {
        ++stats.parse_fallbacks;
    }
    stats.files.push_back(outcome.stats);
}

// Workers claim files in sorted order; the writer drains finished slots in
// the same order so output never depends on scheduling.
CorpusStats drive(const PipelineConfig& cfg, const VocabSpec& vocab, const ParserBackend& backend,
                  std::ostream* out) {
    cfg.validate();
    std::vector<Job> jobs;
    for (Origin& o : discover(cfg)) jobs.push_back({std::move(o), {}, Slot::Pending});

    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(jobs.size(), 1))));

    auto work = [&](std::unique_ptr<ParserBackend> handle) {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            Job& job = jobs[i];
            Slot state = Slot::Done;
            FileOutcome outcome;
            try {
                FileInput input{job.origin.rel, job.origin.language, read_bytes(job.origin.full)};
                outcome = process_file(input, cfg, vocab, *handle, out != nullptr);
            } catch (const std::exception& e) {
                spdlog::warn("skipping {}: {}", job.origin.full.string(), e.what());
                state = Slot::Skipped;
            }
            {
                std::lock_guard lock(mutex);
                job.outcome = std::move(outcome);
                job.state = state;
            }
            ready.notify_all();
        }
    };

    CorpusStats stats;
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, backend.clone());

        for (Job& job : jobs) {
            std::unique_lock lock(mutex);
            ready.wait(lock, [&] { return job.state != Slot::Pending; });
            FileOutcome outcome = std::move(job.outcome);
            const Slot state = job.state;
            lock.unlock();
            if (state == Slot::Skipped) {
                ++stats.files_skipped;
                continue;
            }
            if (out) {
                for (const ExampleRecord& r : outcome.records) *out << to_json_line(r) << '\n';
                if (!*out) throw Error("write failed on " + cfg.output.string());
            }
            accumulate(stats, outcome);
        }
    }
    spdlog::info("{} files, {} records, {} skipped, {} parse fallbacks", stats.files.size(), stats.records,
                 stats.files_skipped, stats.parse_fallbacks);
    return stats;
}

}  // namespace

std::vector<FileInput> discover_files(const PipelineConfig& cfg) {
    std::vector<FileInput> out;
    for (const Origin& o : discover(cfg)) out.push_back({o.rel, o.language, read_bytes(o.full)});
    return out;
}

FileOutcome process_file(const FileInput& file, const PipelineConfig& cfg, const VocabSpec& vocab,
                         const ParserBackend& backend, bool emit_records) {
    FileOutcome outcome;
    outcome.stats.path = file.path;
    outcome.stats.language = file.language;

    TokenizedFile tokens = tokenize(vocab, file.bytes);
    const auto n = static_cast<std::int32_t>(tokens.ids.size());
    outcome.tokens = n;
    outcome.stats.segmentation.n = n;

    std::optional<SpanTree> tree;
    if (is_code(file.language)) {
        try {
            tree.emplace(align(parse(file.bytes, file.language, backend, ParseMode::Strict), tokens));
        } catch (const Error& e) {
            spdlog::debug("{}: falling back to greedy/vanilla: {}", file.path, e.what());
        }
    }

    Segmentation seg;
    CostArray cost;
    if (tree) {
        outcome.stats.parsed = true;
        cost = build_cost(*tree);
        Segmentation dp;
        outcome.stats.segmentation = measure_segmentation(cost, cfg.max_len, &dp);
        seg = cfg.segmentation == SegmentationMode::Ast ? std::move(dp) : segment_greedy(cost, cfg.max_len);
    } else {
        seg = segment_greedy(n, cfg.max_len);
    }
    if (!emit_records) return outcome;

    const bool by_subtree = tree && subtree_corruption(file.language, cfg.corrupt);
    const std::vector<Chunk> chunks = seg.chunks();
    outcome.records.reserve(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        const Chunk chunk = chunks[c];
        const auto index = static_cast<std::int32_t>(c);
        std::span<const TokenId> ids(tokens.ids.data() + chunk.begin, static_cast<std::size_t>(chunk.size()));
        std::optional<SpanTree> local;
        if (by_subtree) local.emplace(restrict_to_chunk(*tree, chunk.begin, chunk.end));

        Rng rng = chunk_rng(cfg.seed, file.path, index);
        ExampleRecord record;
        record.id = record_id(file.path, index);
        record.language = file.language;
        CorruptedExample ex = corrupt_chunk(ids, local ? &*local : nullptr, cfg.corruption, vocab, rng,
                                            &record.meta.theta, &record.meta.n_masked);
        record.input_ids = std::move(ex.input_ids);
        record.target_ids = std::move(ex.target_ids);
        record.meta.n_chunk_tokens = chunk.size();
        record.meta.seg_breaks = tree && chunk.end < n ? cost.at_cut(chunk.end) : 0;
        outcome.records.push_back(std::move(record));
    }
    return outcome;
}

CorpusStats run(const PipelineConfig& cfg, const VocabSpec& vocab, const ParserBackend& backend) {
    cfg.validate();
    if (cfg.output.empty()) throw ConfigError("no output path given");
    const fs::path tmp = cfg.output.string() + ".partial";
    CorpusStats stats;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write output " + cfg.output.string());
        stats = drive(cfg, vocab, backend, &out);
        out.flush();
        if (!out) throw Error("write failed on " + cfg.output.string());
    }
    std::error_code ec;
    fs::rename(tmp, cfg.output, ec);
    if (ec) throw Error("cannot move output into place: " + ec.message());
    return stats;
}

CorpusStats run(const PipelineConfig& cfg, const VocabSpec& vocab) {
    return run(cfg, vocab, CompositeBackend(cfg.grammar_dir));
}

CorpusStats stats(const PipelineConfig& cfg, const VocabSpec& vocab, const ParserBackend& backend) {
    return drive(cfg, vocab, backend, nullptr);
}

CorpusStats stats(const PipelineConfig& cfg, const VocabSpec& vocab) {
    return stats(cfg, vocab, CompositeBackend(cfg.grammar_dir));
}

std::string CorpusStats::to_json(bool timings) const {
    json j;
    json langs = json::object();
    for (const auto& [name, s] : languages) langs[name] = {{"files", s.files}, {"tokens", s.tokens}, {"records", s.records}};
    j["languages"] = std::move(langs);
    j["records"] = records;
    j["files_skipped"] = files_skipped;
    j["parse_fallbacks"] = parse_fallbacks;
    j["greedy_breaks"] = greedy_breaks;
    j["dp_breaks"] = dp_breaks;
    j["break_reduction"] = greedy_breaks > 0 ? 1.0 - static_cast<double>(dp_breaks) / greedy_breaks : 0.0;
    if (timings) {
        std::vector<std::int64_t> micros;
        for (const FileStats& f : files)
            if (f.parsed) micros.push_back(f.segmentation.dp_runtime_micros);
        std::sort(micros.begin(), micros.end());
        auto pct = [&](double q) -> std::int64_t {
            if (micros.empty()) return 0;
            return micros[static_cast<std::size_t>(q * static_cast<double>(micros.size() - 1) + 0.5)];
        };
        j["dp_runtime_micros"] = {{"p50", pct(0.5)}, {"p90", pct(0.9)}, {"max", pct(1.0)}};
    }
    json per_file = json::array();
    for (const FileStats& f : files) {
        json e = {{"path", f.path},
                  {"language", std::string(language_name(f.language))},
                  {"parsed", f.parsed},
                  {"n", f.segmentation.n},
                  {"k_chosen", f.segmentation.k_chosen},
                  {"greedy_breaks", f.segmentation.greedy_breaks},
                  {"dp_breaks", f.segmentation.dp_breaks}};
        if (timings) e["dp_runtime_micros"] = f.segmentation.dp_runtime_micros;
        per_file.push_back(std::move(e));
    }
    j["files"] = std::move(per_file);
    return j.dump(2);
}

ExampleRecord find_record(const fs::path& dataset, std::string_view id) {
    std::ifstream in(dataset, std::ios::binary);
    if (!in) throw NotFoundError("dataset not found: " + dataset.string());
    const std::string needle = "\"id\":\"" + std::string(id) + "\"";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find(needle) == std::string::npos) continue;
        try {
            ExampleRecord r = from_json_line(line);
            if (r.id == id) return r;
        } catch (const IntegrityError& e) {
            throw IntegrityError(std::string(e.what()) + " at line " + std::to_string(lineno));
        }
    }
    throw NotFoundError("no record with id " + std::string(id) + " in " + dataset.string());
}

std::string render_record(const ExampleRecord& record, const VocabSpec& vocab) {
    for (const auto* ids : {&record.input_ids, &record.target_ids})
        for (TokenId id : *ids)
            if (id < 0 || static_cast<std::size_t>(id) >= vocab.total_size())
                throw IntegrityError("record " + record.id + " holds id " + std::to_string(id) +
                                     " outside the vocabulary");
    try {
        decode_sentinels({record.input_ids, record.target_ids}, vocab);
    } catch (const IntegrityError& e) {
        throw IntegrityError("record " + record.id + ": " + e.what());
    }
    auto show = [&](const std::vector<TokenId>& ids) {
        std::string s;
        for (TokenId id : ids) {
            if (vocab.is_sentinel(id))
                s += "<extra_id_" + std::to_string(vocab.sentinel_index(id)) + ">";
            else
                s += vocab.token_bytes(id);
        }
        return s;
    };
    std::ostringstream out;
    out << "id: " << record.id << '\n'
        << "language: " << language_name(record.language) << '\n'
        << "n_chunk_tokens: " << record.meta.n_chunk_tokens << '\n'
        << "n_masked: " << record.meta.n_masked << '\n'
        << "theta: " << (record.meta.theta ? std::to_string(*record.meta.theta) : std::string("none")) << '\n'
        << "seg_breaks: " << record.meta.seg_breaks << '\n'
        << "--- input ---\n"
        << show(record.input_ids) << '\n'
        << "--- target ---\n"
        << show(record.target_ids) << '\n';
    return out.str();
}

}  // namespace astprep
