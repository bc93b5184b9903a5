// Command-line front end: run | stats | inspect.
//
// Exit status: 0..100 is the number of skipped files (capped at 100); 101 is
// a fatal error (bad configuration, unwritable output, missing or corrupt
// dataset).

#include "astprep/errors.hpp"
#include "astprep/pipeline.hpp"
#include "astprep/tree_sitter_backend.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

constexpr int kMaxSkipStatus = 100;
constexpr int kFatalStatus = 101;

struct Options {
    std::vector<std::string> inputs;
    std::string output;
    std::string vocab;
    std::string stats_path;
    std::string id;
    std::int32_t sentinels = 0;  // 0: size the block from max_len and the mask ratio
    std::string log_level = "info";
    bool timings = true;
    astprep::PipelineConfig cfg;
};

void add_corpus_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--input", o.inputs, "Input file or directory (repeatable)")->required();
    cmd.add_option("--vocab", o.vocab, "Vocabulary directory holding vocab.tsv and merges.txt")->required();
    cmd.add_option("--max-len", o.cfg.max_len, "Chunk capacity in tokens")->capture_default_str();
    cmd.add_option("--seg", o.cfg.segmentation, "Segmentation for parsed code")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, astprep::SegmentationMode>{{"ast", astprep::SegmentationMode::Ast},
                                                             {"greedy", astprep::SegmentationMode::Greedy}},
            CLI::ignore_case))
        ->default_str("ast");
    cmd.add_option("--workers", o.cfg.workers, "Worker threads")->capture_default_str();
    cmd.add_option("--mask-ratio", o.cfg.corruption.mask_ratio, "Fraction of chunk tokens masked")
        ->capture_default_str();
}

void add_corruption_flags(CLI::App& cmd, Options& o) {
    auto& c = o.cfg.corruption;
    cmd.add_option("--theta-min", c.theta_min, "Smallest subtree size threshold")->capture_default_str();
    cmd.add_option("--theta-max", c.theta_max, "Largest subtree size threshold")->capture_default_str();
    cmd.add_option("--text-span-min", c.text_span_min, "Shortest vanilla span")->capture_default_str();
    cmd.add_option("--text-span-max", c.text_span_max, "Longest vanilla span")->capture_default_str();
    cmd.add_option("--corrupt", o.cfg.corrupt, "Corruption for code files")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, astprep::CorruptOverride>{{"auto", astprep::CorruptOverride::Auto},
                                                            {"subtree", astprep::CorruptOverride::Subtree},
                                                            {"vanilla", astprep::CorruptOverride::Vanilla}},
            CLI::ignore_case))
        ->default_str("auto");
    cmd.add_option("--seed", o.cfg.seed, "Global seed")->capture_default_str();
    cmd.add_option("--sentinels", o.sentinels, "Sentinel ids reserved above the vocabulary (0 = enough for any chunk)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
}

astprep::VocabSpec load(const Options& o) {
    const int sentinels = o.sentinels > 0 ? o.sentinels : astprep::required_sentinels(o.cfg);
    return astprep::load_vocab(o.vocab, sentinels);
}

void finish_config(Options& o) {
    o.cfg.inputs.assign(o.inputs.begin(), o.inputs.end());
    o.cfg.grammar_dir = astprep::grammar_dir_from_env();
    o.cfg.validate();
}

int skip_status(const astprep::CorpusStats& s) {
    return static_cast<int>(std::min<std::int64_t>(s.files_skipped, kMaxSkipStatus));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text << '\n')) throw astprep::Error("cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AST-aware pretraining data preparation"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    CLI::App* run = app.add_subcommand("run", "Segment and corrupt a corpus into JSON lines");
    add_corpus_flags(*run, o);
    add_corruption_flags(*run, o);
    run->add_option("--output", o.output, "Dataset path")->required();
    run->add_option("--stats", o.stats_path, "Also write corpus statistics as JSON here");

    CLI::App* stats = app.add_subcommand("stats", "Compare greedy and AST-aware breaks; print JSON");
    add_corpus_flags(*stats, o);
    add_corruption_flags(*stats, o);
    stats->add_flag("!--no-timings", o.timings, "Omit the DP runtime distribution (output becomes deterministic)");

    CLI::App* inspect = app.add_subcommand("inspect", "Render one record");
    inspect->add_option("--output,--dataset", o.output, "Dataset path")->required();
    inspect->add_option("--id", o.id, "Record id")->required();
    inspect->add_option("--vocab", o.vocab, "Vocabulary directory")->required();
    inspect->add_option("--sentinels", o.sentinels, "Sentinel block size the dataset was written with")
        ->check(CLI::NonNegativeNumber);
    inspect->add_option("--max-len", o.cfg.max_len, "max_len the dataset was written with (sizes the sentinel block)");
    inspect->add_option("--mask-ratio", o.cfg.corruption.mask_ratio, "mask ratio the dataset was written with");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kFatalStatus;
    }

    try {
        spdlog::set_default_logger(spdlog::stderr_logger_mt("astprep"));
        spdlog::set_level(spdlog::level::from_str(o.log_level));
        if (*run) {
            finish_config(o);
            o.cfg.output = o.output;
            astprep::CorpusStats s = astprep::run(o.cfg, load(o));
            if (!o.stats_path.empty()) write_text(o.stats_path, s.to_json());
            return skip_status(s);
        }
        if (*stats) {
            finish_config(o);
            astprep::CorpusStats s = astprep::stats(o.cfg, load(o));
            std::cout << s.to_json(o.timings) << '\n';
            return skip_status(s);
        }
        std::cout << astprep::inspect(o.output, o.id, load(o));
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "astprep: %s\n", e.what());
        return kFatalStatus;
    }
}
