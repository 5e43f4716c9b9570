#include "hprobe/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "hprobe/error.hpp"
#include "hprobe/rng.hpp"

namespace hprobe {

int position_depth(Position q) {
  return static_cast<int>(std::bit_width(static_cast<unsigned>(q) + 1U)) - 1;
}

LabeledTree::LabeledTree(int depth_max, std::vector<Label> label_table)
    : depth_max_(depth_max), label_of_(std::move(label_table)) {
  if (depth_max_ < 0 || depth_max_ > kMaxTreeDepth) {
    throw InputError("tree depth " + std::to_string(depth_max_) + " outside [0, " +
                     std::to_string(kMaxTreeDepth) + "]");
  }
  const int full = full_tree_size(depth_max_);
  if (static_cast<int>(label_of_.size()) != full) {
    throw DataIntegrityError("label table has " + std::to_string(label_of_.size()) +
                             " entries, expected " + std::to_string(full));
  }
  position_of_.assign(full, -1);
  bool reaches_max_depth = false;
  for (Position q = 0; q < full; ++q) {
    const Label a = label_of_[q];
    if (a < 0) continue;
    if (q > 0 && label_of_[parent_position(q)] < 0) {
      throw DataIntegrityError("position " + std::to_string(q) +
                               " retained without its parent");
    }
    if (a >= full || position_of_[a] >= 0) {
      throw DataIntegrityError("label " + std::to_string(a) + " is out of range or repeated");
    }
    position_of_[a] = q;
    positions_.push_back(q);
    reaches_max_depth = reaches_max_depth || position_depth(q) == depth_max_;
  }
  if (positions_.empty() || label_of_[0] < 0) {
    throw DataIntegrityError("tree has no root");
  }
  if (!reaches_max_depth) {
    throw DataIntegrityError("tree does not reach its declared depth " +
                             std::to_string(depth_max_));
  }
  // The label set must equal the position set.
  for (Position q : positions_) {
    if (position_of_[q] < 0) {
      throw DataIntegrityError("label set differs from position set at " + std::to_string(q));
    }
  }
}

bool LabeledTree::has_position(Position q) const {
  return q >= 0 && q < static_cast<int>(label_of_.size()) && label_of_[q] >= 0;
}

bool LabeledTree::has_label(Label a) const {
  return a >= 0 && a < static_cast<int>(position_of_.size()) && position_of_[a] >= 0;
}

Label LabeledTree::label_of(Position q) const {
  if (!has_position(q)) throw InputError("unknown position " + std::to_string(q));
  return label_of_[q];
}

Position LabeledTree::position_of(Label a) const {
  if (!has_label(a)) throw InputError("unknown label " + std::to_string(a));
  return position_of_[a];
}

std::vector<Label> LabeledTree::labels() const {
  std::vector<Label> out;
  out.reserve(positions_.size());
  for (Position q : positions_) out.push_back(label_of_[q]);
  return out;
}

std::vector<Label> LabeledTree::neighbors(Label a) const {
  const Position q = position_of(a);
  std::vector<Label> out;
  if (q > 0) out.push_back(label_of_[parent_position(q)]);
  for (Position c : {2 * q + 1, 2 * q + 2}) {
    if (has_position(c)) out.push_back(label_of_[c]);
  }
  return out;
}

LabeledTree build_full_tree(int d) {
  if (d < 0 || d > kMaxTreeDepth) {
    throw InputError("tree depth " + std::to_string(d) + " outside [0, " +
                     std::to_string(kMaxTreeDepth) + "]");
  }
  std::vector<Label> table(full_tree_size(d));
  std::iota(table.begin(), table.end(), 0);
  return LabeledTree(d, std::move(table));
}

LabeledTree sparsify(const LabeledTree& tree, double sparsity, std::uint64_t seed) {
  if (!(sparsity >= 0.5 && sparsity <= 1.0)) {
    throw InputError("sparsity " + std::to_string(sparsity) + " outside [0.5, 1.0]");
  }
  if (!tree.is_full()) throw InputError("sparsify expects a full tree");

  const int d = tree.depth_max();
  const int full = full_tree_size(d);
  const int target = std::clamp(static_cast<int>(std::lround(sparsity * full)), d + 1, full);

  Rng rng(seed);
  std::vector<char> kept(full, 0);
  // Root-to-leaf chain through a uniformly chosen max-depth leaf.
  Position q = ((1 << d) - 1) + static_cast<Position>(rng.below(1ULL << d));
  kept[q] = 1;
  while (q > 0) {
    q = parent_position(q);
    kept[q] = 1;
  }
  int count = d + 1;

  auto frontier = [&] {
    std::vector<Position> out;
    for (Position p = 1; p < full; ++p) {
      if (!kept[p] && kept[parent_position(p)]) out.push_back(p);
    }
    return out;
  };
  while (count < target) {
    const auto open = frontier();
    kept[open[rng.below(open.size())]] = 1;
    ++count;
  }

  std::vector<Label> table(full, -1);
  for (Position p = 0; p < full; ++p) {
    if (kept[p]) table[p] = p;
  }
  return LabeledTree(d, std::move(table));
}

LabeledTree relabel(const LabeledTree& tree, std::span<const Label> labels) {
  const auto positions = tree.positions();
  if (labels.size() != positions.size()) {
    throw InputError("relabel needs " + std::to_string(positions.size()) + " labels, got " +
                     std::to_string(labels.size()));
  }
  std::vector<Label> table(tree.label_table().size(), -1);
  for (std::size_t i = 0; i < positions.size(); ++i) table[positions[i]] = labels[i];
  return LabeledTree(tree.depth_max(), std::move(table));
}

LabeledTree permute_labels(const LabeledTree& tree, std::uint64_t seed) {
  std::vector<Label> shuffled(tree.positions().begin(), tree.positions().end());
  Rng rng(seed);
  rng.shuffle(std::span<Label>(shuffled));
  return relabel(tree, shuffled);
}

Label lowest_common_ancestor(const LabeledTree& tree, Label a, Label b) {
  Position p = tree.position_of(a);
  Position q = tree.position_of(b);
  while (p != q) {
    if (p > q) {
      p = parent_position(p);
    } else {
      q = parent_position(q);
    }
  }
  return tree.label_of(p);
}

Path shortest_path(const LabeledTree& tree, Label a, Label b) {
  Position p = tree.position_of(a);
  Position q = tree.position_of(b);
  Path up;
  std::vector<Position> down;
  while (p != q) {
    if (p > q) {
      up.push_back(tree.label_of(p));
      p = parent_position(p);
    } else {
      down.push_back(q);
      q = parent_position(q);
    }
  }
  up.push_back(tree.label_of(p));
  for (auto it = down.rbegin(); it != down.rend(); ++it) up.push_back(tree.label_of(*it));
  return up;
}

int tree_distance(const LabeledTree& tree, Label a, Label b) {
  const Label lca = lowest_common_ancestor(tree, a, b);
  return node_depth(tree, a) + node_depth(tree, b) - 2 * node_depth(tree, lca);
}

int node_depth(const LabeledTree& tree, Label a) {
  return position_depth(tree.position_of(a));
}

bool is_valid_path(const LabeledTree& tree, std::span<const Label> path) {
  if (path.empty()) return false;
  for (Label a : path) {
    if (!tree.has_label(a)) return false;
  }
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] == path[i - 1]) return false;
    const Position p = tree.position_of(path[i - 1]);
    const Position q = tree.position_of(path[i]);
    const bool adjacent = (q > 0 && parent_position(q) == p) || (p > 0 && parent_position(p) == q);
    if (!adjacent) return false;
  }
  return true;
}

GraphMetrics graph_metrics(const StepGraph& graph) {
  const std::size_t n = graph.node_count();
  std::vector<std::vector<int>> children(n);
  std::vector<std::vector<int>> undirected(n);
  std::vector<int> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (int u : graph.parents_of[v]) {
      if (u < 0 || static_cast<std::size_t>(u) >= n) {
        throw InputError("step " + std::to_string(v) + " has unknown parent " + std::to_string(u));
      }
      children[u].push_back(static_cast<int>(v));
      undirected[u].push_back(static_cast<int>(v));
      undirected[v].push_back(u);
      ++indegree[v];
    }
  }

  // Kahn order; leftovers mean a cycle.
  GraphMetrics out;
  out.depth.assign(n, 0);
  std::deque<int> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push_back(static_cast<int>(v));
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const int u = ready.front();
    ready.pop_front();
    ++visited;
    for (int v : children[u]) {
      out.depth[v] = std::max(out.depth[v], out.depth[u] + 1);
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  if (visited != n) throw InputError("step graph contains a cycle");

  out.distance.assign(n, std::vector<int>(n, kDisconnected));
  for (std::size_t s = 0; s < n; ++s) {
    auto& row = out.distance[s];
    row[s] = 0;
    std::deque<int> queue{static_cast<int>(s)};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : undirected[u]) {
        if (row[v] == kDisconnected) {
          row[v] = row[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return out;
}

}  // namespace hprobe
