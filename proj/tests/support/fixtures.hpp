#pragma once

// Shared fixtures and independent oracles for the unit and acceptance suites.
// Nothing here calls into the segmenter or corruptor implementations.

#include "astprep/ast_parse.hpp"
#include "astprep/rng.hpp"
#include "astprep/segmenter.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace astprep::testing {

/// Class with two methods; the second holds a While with a nested If.
/// 112 tokens. Greedy chunks of 48 break 9 nodes, the best partition 3.
SpanTree nested_class_tree();
std::vector<LabeledSpan> nested_class_spans();
inline constexpr std::int32_t kNestedClassTokens = 112;
inline constexpr std::int32_t kNestedClassMaxLen = 48;

/// Backend returning the nested-class spans as byte records, for a 112-byte Toy file
/// under a merge-free byte vocabulary.
std::unique_ptr<ParserBackend> nested_class_backend();
std::string nested_class_source();

/// Random laminar tree over n tokens: each inner node splits its range into
/// 1..max_children segments, each segment becoming a node with probability
/// `p_node`.
SpanTree random_span_tree(Rng& rng, std::int32_t n, int max_children = 4, double p_node = 0.7);

/// Complete binary tree over `leaves` tokens (a power of two).
SpanTree balanced_tree(std::int32_t leaves);

/// Fixed 600-token tree with nesting depth around 8, from a fixed seed.
SpanTree deep_tree();

struct Partition {
    std::int64_t breaks = 0;
    std::vector<std::int32_t> cuts;
};

/// Breaks of a cut set counted directly from node spans.
std::int64_t breaks_by_spans(const SpanTree& tree, const std::vector<std::int32_t>& cuts);

/// Enumerates every partition into chunks of length 1..max_len. Returns the
/// minimum breaks; ties go to fewer chunks, then to the cut sequence that is
/// smallest when compared from its last interior cut backwards.
Partition exhaustive_partition(const SpanTree& tree, std::int32_t max_len);

/// Random source in the Toy language, roughly `statements` top-level items.
std::string random_toy_program(Rng& rng, int statements);
std::string random_python_program(Rng& rng, int statements);
std::string random_markdown(Rng& rng, int paragraphs);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

void write_file(const std::filesystem::path& p, const std::string& bytes);
std::string read_file(const std::filesystem::path& p);

}  // namespace astprep::testing
