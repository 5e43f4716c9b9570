#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hprobe/tree.hpp"

namespace hprobe {

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct TraversalExample {
  std::string id;
  LabeledTree tree;
  std::vector<Label> anchors;  // steps + 1 labels
  int steps = 1;
  Path truth;
  std::optional<double> sparsity;
  std::uint64_t seed = 0;  // per-example stream
};

struct DatasetConfig {
  IntRange depth{1, 2};
  IntRange steps{1, 2};
  int num_samples = 1000;
  std::optional<RealRange> sparsity;
  std::uint64_t seed = 0;
};

/// Balanced over step counts (num_samples / #step values each); each example
/// draws its depth uniformly, a fresh (optionally sparsified) permuted tree,
/// and anchors without consecutive repeats.
std::vector<TraversalExample> sample_dataset(const DatasetConfig& config);

/// Concatenated per-step shortest paths with duplicated boundary nodes
/// dropped.
Path traversal_truth(const LabeledTree& tree, std::span<const Label> anchors);

/// Level-order ASCII drawing; connectors use '/', '\' and '_'.
std::string render_tree(const LabeledTree& tree);
std::string build_prompt(const TraversalExample& example);

/// Last line starting with "PATH:" after stripping whitespace and
/// chain-of-thought delimiters. Any non-numeric token is a failure.
std::optional<Path> parse_path(std::string_view raw_text);

struct Score {
  bool exact = false;
  double partial = 0.0;
};

/// Exact sequence match; partial = common-prefix length / truth length.
Score score(const std::optional<Path>& parsed, const Path& truth);

struct ScoredResponse {
  std::string id;
  std::string prompt_hash;
  std::string raw_text;
  std::optional<Path> parsed;
  bool exact = false;
  double partial = 0.0;
};

ScoredResponse score_response(const TraversalExample& example, std::string raw_text);

// Line-delimited JSON stores. Field names and order are part of the format.
std::string dataset_line(const TraversalExample& example);
TraversalExample parse_dataset_line(std::string_view line);
void write_dataset(const std::filesystem::path& path, const std::vector<TraversalExample>& examples);
std::vector<TraversalExample> read_dataset(const std::filesystem::path& path);

std::string response_line(const ScoredResponse& response);
ScoredResponse parse_response_line(std::string_view line);
void write_responses(const std::filesystem::path& path, const std::vector<ScoredResponse>& responses);
std::vector<ScoredResponse> read_responses(const std::filesystem::path& path);

}  // namespace hprobe
