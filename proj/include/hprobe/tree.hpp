#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hprobe {

using Label = int;
using Position = int;
using Path = std::vector<Label>;

/// Largest supported depth; keeps BFS indices well inside `int`.
inline constexpr int kMaxTreeDepth = 20;

constexpr Position parent_position(Position q) { return (q - 1) / 2; }
int position_depth(Position q);
constexpr int full_tree_size(int depth_max) { return (1 << (depth_max + 1)) - 1; }

/// An ancestor-closed subset of the full binary tree of depth `depth_max`
/// (positions are BFS indices) together with a bijective labeling whose label
/// set equals the position set.
class LabeledTree {
 public:
  /// Validates ancestor closure, max-depth attainment and the bijection.
  /// `label_table` is indexed by position over the full tree; absent
  /// positions hold -1.
  LabeledTree(int depth_max, std::vector<Label> label_table);

  int depth_max() const { return depth_max_; }
  std::size_t size() const { return positions_.size(); }
  bool is_full() const {
    return positions_.size() == static_cast<std::size_t>(full_tree_size(depth_max_));
  }

  /// Retained positions, ascending.
  std::span<const Position> positions() const { return positions_; }
  /// Index = position over the full tree, value = label or -1.
  std::span<const Label> label_table() const { return label_of_; }

  bool has_position(Position q) const;
  bool has_label(Label a) const;
  Label label_of(Position q) const;
  Position position_of(Label a) const;

  /// Labels in ascending position order.
  std::vector<Label> labels() const;
  /// Tree neighbours (parent and retained children) of a label.
  std::vector<Label> neighbors(Label a) const;

  friend bool operator==(const LabeledTree&, const LabeledTree&) = default;

 private:
  int depth_max_;
  std::vector<Position> positions_;
  std::vector<Label> label_of_;
  std::vector<Position> position_of_;
};

/// Full tree of depth `d` with identity labeling.
LabeledTree build_full_tree(int d);

/// Keeps round(sparsity * N) positions (clamped to at least one
/// root-to-max-depth chain), ancestor-closed. Only full trees are accepted.
LabeledTree sparsify(const LabeledTree& tree, double sparsity, std::uint64_t seed);

/// Fisher-Yates permutation of the label set over sorted positions.
LabeledTree permute_labels(const LabeledTree& tree, std::uint64_t seed);

/// Assigns `labels[i]` to the i-th retained position (ascending).
LabeledTree relabel(const LabeledTree& tree, std::span<const Label> labels);

Label lowest_common_ancestor(const LabeledTree& tree, Label a, Label b);
Path shortest_path(const LabeledTree& tree, Label a, Label b);
int tree_distance(const LabeledTree& tree, Label a, Label b);
int node_depth(const LabeledTree& tree, Label a);

/// True when every label is in the tree, consecutive labels are adjacent and
/// no label repeats immediately.
bool is_valid_path(const LabeledTree& tree, std::span<const Label> path);

/// Reasoning-step DAG; `parents_of[i]` lists the prerequisites of step i.
struct StepGraph {
  std::vector<std::vector<int>> parents_of;

  std::size_t node_count() const { return parents_of.size(); }
};

inline constexpr int kDisconnected = -1;

struct GraphMetrics {
  std::vector<int> depth;                  // longest path from any root
  std::vector<std::vector<int>> distance;  // undirected hops, kDisconnected
};

GraphMetrics graph_metrics(const StepGraph& graph);

}  // namespace hprobe
