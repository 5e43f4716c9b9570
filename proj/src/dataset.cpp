#include "hprobe/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "hprobe/error.hpp"
#include "hprobe/hash.hpp"
#include "hprobe/io.hpp"
#include "hprobe/rng.hpp"

namespace hprobe {

using ojson = nlohmann::ordered_json;

namespace {

void check_config(const DatasetConfig& c) {
  if (c.depth.lo > c.depth.hi || c.steps.lo > c.steps.hi) {
    throw InputError("range with lo > hi");
  }
  if (c.depth.lo < 1) {
    throw InputError("depth " + std::to_string(c.depth.lo) +
                     " leaves a single node; distinct consecutive anchors are impossible");
  }
  if (c.depth.hi > kMaxTreeDepth) throw InputError("depth above " + std::to_string(kMaxTreeDepth));
  if (c.steps.lo < 1) throw InputError("steps must be at least 1");
  if (c.num_samples < 1) throw InputError("num-samples must be positive");
  const int step_values = c.steps.hi - c.steps.lo + 1;
  if (c.num_samples % step_values != 0) {
    throw InputError("num-samples " + std::to_string(c.num_samples) +
                     " cannot be balanced over " + std::to_string(step_values) + " step counts");
  }
  if (c.sparsity && !(c.sparsity->lo >= 0.5 && c.sparsity->lo <= c.sparsity->hi &&
                      c.sparsity->hi <= 1.0)) {
    throw InputError("sparsity range must lie within [0.5, 1.0]");
  }
}

std::string example_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ex-%05d", index);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Removes reasoning-block tags and markdown emphasis around a line.
std::string strip_delimiters(std::string_view line) {
  std::string s(line);
  for (const std::string_view tag : {"<think>", "</think>", "**", "`"}) {
    for (auto at = s.find(tag); at != std::string::npos; at = s.find(tag)) s.erase(at, tag.size());
  }
  return std::string(trim(s));
}

}  // namespace

Path traversal_truth(const LabeledTree& tree, std::span<const Label> anchors) {
  if (anchors.size() < 2) throw InputError("a traversal needs at least two anchors");
  Path out{anchors.front()};
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    if (anchors[i] == anchors[i - 1]) throw InputError("consecutive anchors are identical");
    const Path leg = shortest_path(tree, anchors[i - 1], anchors[i]);
    out.insert(out.end(), leg.begin() + 1, leg.end());
  }
  return out;
}

std::vector<TraversalExample> sample_dataset(const DatasetConfig& config) {
  check_config(config);
  const int step_values = config.steps.hi - config.steps.lo + 1;
  std::vector<int> steps;
  steps.reserve(config.num_samples);
  for (int s = config.steps.lo; s <= config.steps.hi; ++s) {
    steps.insert(steps.end(), config.num_samples / step_values, s);
  }
  Rng order(derive_seed(config.seed, 0x5354455053ULL));
  order.shuffle(std::span<int>(steps));

  std::vector<TraversalExample> out;
  out.reserve(config.num_samples);
  for (int i = 0; i < config.num_samples; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    Rng rng(seed);
    const int depth = rng.uniform_int(config.depth.lo, config.depth.hi);
    LabeledTree tree = build_full_tree(depth);
    std::optional<double> sparsity;
    if (config.sparsity) {
      sparsity = rng.uniform(config.sparsity->lo, config.sparsity->hi);
      tree = sparsify(tree, *sparsity, derive_seed(seed, 1));
    }
    tree = permute_labels(tree, derive_seed(seed, 2));

    const std::vector<Label> labels = tree.labels();
    std::vector<Label> anchors{labels[rng.below(labels.size())]};
    for (int k = 0; k < steps[i]; ++k) {
      // Uniform over labels other than the previous anchor.
      auto pick = static_cast<std::size_t>(rng.below(labels.size() - 1));
      if (labels[pick] == anchors.back()) pick = labels.size() - 1;
      anchors.push_back(labels[pick]);
    }
    Path truth = traversal_truth(tree, anchors);
    out.push_back(TraversalExample{example_id(i), std::move(tree), std::move(anchors), steps[i],
                                   std::move(truth), sparsity, seed});
  }
  return out;
}

std::string render_tree(const LabeledTree& tree) {
  const int d = tree.depth_max();
  const int widest = static_cast<int>(std::to_string(full_tree_size(d) - 1).size());
  int slot = std::max(4, widest + 2);
  slot += slot % 2;
  const int width = (1 << d) * slot;

  auto center = [&](Position q) {
    const int k = position_depth(q);
    const int j = q - ((1 << k) - 1);
    const int span = 1 << (d - k);
    const int first = j * span;
    const int last = first + span - 1;
    return (first + last) * slot / 2 + slot / 2;
  };
  auto rstrip = [](std::string s) {
    s.erase(s.find_last_not_of(' ') + 1);
    return s;
  };

  std::string out;
  for (int k = 0; k <= d; ++k) {
    std::string nodes(width + widest, ' ');
    std::string links(width + widest, ' ');
    bool any_link = false;
    for (Position q = (1 << k) - 1; q < (1 << (k + 1)) - 1; ++q) {
      if (!tree.has_position(q)) continue;
      const std::string text = std::to_string(tree.label_of(q));
      const int c = center(q);
      nodes.replace(c - static_cast<int>(text.size() - 1) / 2, text.size(), text);
      if (k == d) continue;
      const Position left = 2 * q + 1;
      const Position right = 2 * q + 2;
      if (tree.has_position(left)) {
        const int lc = center(left);
        links[c - 1] = '/';
        for (int x = lc + 1; x <= c - 2; ++x) links[x] = '_';
        any_link = true;
      }
      if (tree.has_position(right)) {
        const int rc = center(right);
        links[c + 1] = '\\';
        for (int x = c + 2; x <= rc - 1; ++x) links[x] = '_';
        any_link = true;
      }
    }
    out += rstrip(nodes) + "\n";
    if (any_link) out += rstrip(links) + "\n";
  }
  return out;
}

std::string build_prompt(const TraversalExample& example) {
  std::ostringstream p;
  p << "You are a tree traversal assistant. The binary tree below has integer node labels. "
       "The root is at depth 0 and the deepest nodes are at depth "
    << example.tree.depth_max() << ".\n\nTree:\n"
    << render_tree(example.tree) << "\nEdges (parent: children):\n";
  for (Position q : example.tree.positions()) {
    std::vector<Label> children;
    for (Position c : {2 * q + 1, 2 * q + 2}) {
      if (example.tree.has_position(c)) children.push_back(example.tree.label_of(c));
    }
    if (children.empty()) continue;
    p << "  " << example.tree.label_of(q) << ":";
    for (Label c : children) p << ' ' << c;
    p << '\n';
  }
  p << "\nTask: starting at node " << example.anchors.front();
  for (std::size_t i = 1; i < example.anchors.size(); ++i) {
    p << (i == 1 ? ", travel along the shortest path to node " : ", then continue along the shortest path to node ")
      << example.anchors[i];
  }
  p << ". Move only along tree edges, one edge at a time, and list every node you pass through.\n"
       "Think step by step. The final line of your response must contain only the path, "
       "in the format:\nPATH: n_0 n_1 ... n_f\n";
  return p.str();
}

std::optional<Path> parse_path(std::string_view raw_text) {
  std::optional<std::string> found;
  std::size_t start = 0;
  while (start <= raw_text.size()) {
    auto end = raw_text.find('\n', start);
    if (end == std::string_view::npos) end = raw_text.size();
    std::string line = strip_delimiters(raw_text.substr(start, end - start));
    if (line.starts_with("PATH:")) found = line.substr(5);
    start = end + 1;
  }
  if (!found) return std::nullopt;

  Path path;
  std::istringstream tokens(*found);
  for (std::string token; tokens >> token;) {
    Label value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || value < 0 || token[0] == '-' ||
        token[0] == '+') {
      return std::nullopt;
    }
    path.push_back(value);
  }
  if (path.empty()) return std::nullopt;
  return path;
}

Score score(const std::optional<Path>& parsed, const Path& truth) {
  if (truth.empty()) throw InputError("cannot score against an empty truth path");
  if (!parsed) return {};
  const auto [mismatch, _] =
      std::mismatch(parsed->begin(), parsed->end(), truth.begin(), truth.end());
  const auto prefix = static_cast<double>(mismatch - parsed->begin());
  return {*parsed == truth, std::min(1.0, prefix / static_cast<double>(truth.size()))};
}

ScoredResponse score_response(const TraversalExample& example, std::string raw_text) {
  ScoredResponse r;
  r.id = example.id;
  r.prompt_hash = sha256_hex(build_prompt(example));
  r.parsed = parse_path(raw_text);
  r.raw_text = std::move(raw_text);
  const Score s = score(r.parsed, example.truth);
  r.exact = s.exact;
  r.partial = s.partial;
  return r;
}

std::string dataset_line(const TraversalExample& e) {
  ojson j;
  j["id"] = e.id;
  j["depth_max"] = e.tree.depth_max();
  j["positions"] = std::vector<Position>(e.tree.positions().begin(), e.tree.positions().end());
  j["label_of"] = std::vector<Label>(e.tree.label_table().begin(), e.tree.label_table().end());
  j["anchors"] = e.anchors;
  j["steps"] = e.steps;
  j["truth"] = e.truth;
  j["sparsity"] = e.sparsity ? ojson(*e.sparsity) : ojson(nullptr);
  j["seed"] = e.seed;
  return j.dump();
}

TraversalExample parse_dataset_line(std::string_view line) {
  try {
    const auto j = ojson::parse(line);
    TraversalExample e{j.at("id").get<std::string>(),
                       LabeledTree(j.at("depth_max").get<int>(),
                                   j.at("label_of").get<std::vector<Label>>()),
                       j.at("anchors").get<std::vector<Label>>(),
                       j.at("steps").get<int>(),
                       j.at("truth").get<Path>(),
                       std::nullopt,
                       j.at("seed").get<std::uint64_t>()};
    if (!j.at("sparsity").is_null()) e.sparsity = j.at("sparsity").get<double>();
    const auto positions = j.at("positions").get<std::vector<Position>>();
    if (!std::equal(positions.begin(), positions.end(), e.tree.positions().begin(),
                    e.tree.positions().end())) {
      throw DataIntegrityError("positions disagree with label_of in " + e.id);
    }
    if (static_cast<int>(e.anchors.size()) != e.steps + 1 ||
        traversal_truth(e.tree, e.anchors) != e.truth) {
      throw DataIntegrityError("anchors/truth inconsistent in " + e.id);
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed dataset record: ") + ex.what());
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<TraversalExample>& examples) {
  std::string out;
  for (const auto& e : examples) out += dataset_line(e) + "\n";
  write_file_atomic(path, out);
}

std::vector<TraversalExample> read_dataset(const std::filesystem::path& path) {
  std::vector<TraversalExample> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_dataset_line(line));
  return out;
}

std::string response_line(const ScoredResponse& r) {
  ojson j;
  j["id"] = r.id;
  j["prompt_hash"] = r.prompt_hash;
  j["raw_text"] = r.raw_text;
  j["parsed"] = r.parsed ? ojson(*r.parsed) : ojson(nullptr);
  j["exact"] = r.exact;
  j["partial"] = r.partial;
  return j.dump();
}

ScoredResponse parse_response_line(std::string_view line) {
  try {
    const auto j = ojson::parse(line);
    ScoredResponse r{j.at("id").get<std::string>(),     j.at("prompt_hash").get<std::string>(),
                     j.at("raw_text").get<std::string>(), std::nullopt,
                     j.at("exact").get<bool>(),           j.at("partial").get<double>()};
    if (!j.at("parsed").is_null()) r.parsed = j.at("parsed").get<Path>();
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed response record: ") + ex.what());
  }
}

void write_responses(const std::filesystem::path& path, const std::vector<ScoredResponse>& responses) {
  std::string out;
  for (const auto& r : responses) out += response_line(r) + "\n";
  write_file_atomic(path, out);
}

std::vector<ScoredResponse> read_responses(const std::filesystem::path& path) {
  std::vector<ScoredResponse> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_response_line(line));
  return out;
}

}  // namespace hprobe
