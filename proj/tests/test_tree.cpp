#include <doctest.h>

#include <algorithm>
#include <set>

#include "hprobe/error.hpp"
#include "hprobe/tree.hpp"
#include "oracles.hpp"

using namespace hprobe;

namespace {

bool ancestor_closed(const LabeledTree& t) {
  for (Position q : t.positions()) {
    if (q > 0 && !t.has_position(parent_position(q))) return false;
  }
  return true;
}

std::vector<LabeledTree> trees_up_to_depth_4() {
  std::vector<LabeledTree> out;
  for (int d = 0; d <= 4; ++d) {
    out.push_back(build_full_tree(d));
    out.push_back(permute_labels(build_full_tree(d), 100 + d));
    for (double s : {0.5, 0.6, 0.75, 0.9}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        out.push_back(permute_labels(sparsify(build_full_tree(d), s, seed), seed + 7));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("full trees have 2^(d+1)-1 positions") {
  CHECK(build_full_tree(0).size() == 1);
  CHECK(build_full_tree(1).size() == 3);
  CHECK(build_full_tree(2).size() == 7);
  CHECK(build_full_tree(4).size() == 31);
  const auto t = build_full_tree(2);
  for (Position q : t.positions()) CHECK(t.label_of(q) == q);
  CHECK_THROWS_AS(build_full_tree(-1), InputError);
}

TEST_CASE("sparsify keeps an ancestor-closed subset of the target size") {
  const auto full = build_full_tree(3);
  CHECK(sparsify(full, 1.0, 5).positions().size() == 15);
  CHECK(std::ranges::equal(sparsify(full, 1.0, 5).positions(), full.positions()));

  // round(0.5 * 15) = 8
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = sparsify(full, 0.5, seed);
    CHECK(t.size() == 8);
    CHECK(ancestor_closed(t));
    CHECK(t.depth_max() == 3);
  }
  CHECK(sparsify(full, 0.5, 3) == sparsify(full, 0.5, 3));
  CHECK_THROWS_AS(sparsify(full, 0.4, 0), InputError);
  CHECK_THROWS_AS(sparsify(full, 1.1, 0), InputError);
  CHECK_THROWS_AS(sparsify(sparsify(full, 0.5, 0), 0.9, 0), InputError);
}

TEST_CASE("sparsify size deviates from the rounded target only by the chain clamp") {
  for (int d = 1; d <= 4; ++d) {
    const int n = full_tree_size(d);
    for (double s = 0.5; s <= 1.0; s += 0.05) {
      const auto t = sparsify(build_full_tree(d), s, 11);
      const int target = static_cast<int>(std::lround(s * n));
      CHECK(static_cast<int>(t.size()) == std::max(target, d + 1));
      CHECK(ancestor_closed(t));
    }
  }
}

TEST_CASE("permute_labels is a bijection and matches the worked permutation") {
  const auto t = relabel(build_full_tree(2), std::vector<Label>{5, 0, 3, 6, 2, 4, 1});
  CHECK(t.label_of(0) == 5);
  CHECK(t.position_of(5) == 0);

  const auto same = relabel(build_full_tree(2), std::vector<Label>{0, 1, 2, 3, 4, 5, 6});
  for (Position q = 0; q < 7; ++q) CHECK(same.label_of(q) == q);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = permute_labels(build_full_tree(3), seed);
    std::set<Label> seen;
    for (Position q : p.positions()) {
      CHECK(p.position_of(p.label_of(q)) == q);
      seen.insert(p.label_of(q));
    }
    CHECK(seen.size() == 15);
  }
  CHECK(permute_labels(build_full_tree(3), 9) == permute_labels(build_full_tree(3), 9));
}

TEST_CASE("shortest paths, distances and depths on the identity depth-2 tree") {
  const auto t = build_full_tree(2);
  CHECK(shortest_path(t, 4, 4) == Path{4});
  CHECK(shortest_path(t, 3, 6) == Path{3, 1, 0, 2, 6});
  CHECK(shortest_path(t, 1, 4) == Path{1, 4});
  CHECK(tree_distance(t, 5, 5) == 0);
  CHECK(tree_distance(t, 3, 4) == 2);
  CHECK(tree_distance(t, 3, 6) == 4);
  CHECK(node_depth(t, 0) == 0);
  CHECK(node_depth(t, 1) == 1);
  CHECK(node_depth(t, 2) == 1);
  CHECK(node_depth(t, 6) == 2);
  CHECK_THROWS_AS(tree_distance(t, 0, 7), InputError);
  CHECK_THROWS_AS(node_depth(t, -1), InputError);
  CHECK_THROWS_AS(shortest_path(t, 9, 0), InputError);
}

TEST_CASE("tree math agrees with BFS on every pair of every tree up to depth 4") {
  for (const auto& t : trees_up_to_depth_4()) {
    const auto adj = oracle::adjacency(t);
    const auto root = t.label_of(0);
    const auto depth = oracle::bfs_distances(adj, root);
    for (Label a : t.labels()) {
      CHECK(node_depth(t, a) == depth.at(a));
      const auto dist = oracle::bfs_distances(adj, a);
      for (Label b : t.labels()) {
        const int d = tree_distance(t, a, b);
        REQUIRE(d == dist.at(b));
        CHECK(d == tree_distance(t, b, a));
        const Path p = shortest_path(t, a, b);
        CHECK(p == oracle::bfs_path(adj, a, b));
        CHECK(static_cast<int>(p.size()) - 1 == d);
        CHECK(is_valid_path(t, p));
        const Label lca = lowest_common_ancestor(t, a, b);
        CHECK(d == node_depth(t, a) + node_depth(t, b) - 2 * node_depth(t, lca));
      }
    }
  }
}

TEST_CASE("path validation") {
  const auto t = build_full_tree(2);
  CHECK(is_valid_path(t, Path{3, 1, 0}));
  CHECK_FALSE(is_valid_path(t, Path{3, 3}));
  CHECK_FALSE(is_valid_path(t, Path{3, 0}));
  CHECK_FALSE(is_valid_path(t, Path{}));
  CHECK_FALSE(is_valid_path(t, Path{8}));
}

TEST_CASE("tree construction rejects broken label tables") {
  CHECK_THROWS_AS(LabeledTree(1, {0, -1, 2, -1}), DataIntegrityError);  // wrong size
  CHECK_THROWS_AS(LabeledTree(2, {0, -1, 2, 3, -1, -1, -1}), DataIntegrityError);  // orphan
  CHECK_THROWS_AS(LabeledTree(1, {0, 0, 2}), DataIntegrityError);  // repeated label
  CHECK_THROWS_AS(LabeledTree(2, {0, 1, 2, -1, -1, -1, -1}), DataIntegrityError);  // too shallow
}

TEST_CASE("step-graph depth is the longest path, distance is undirected hops") {
  const auto chain = graph_metrics(StepGraph{{{}, {0}, {1}}});
  CHECK(chain.depth == std::vector<int>{0, 1, 2});
  CHECK(chain.distance[0][2] == 2);

  // Node 2 has parents 0 (depth 0) and 1 (depth 1): longest chain 0->1->2.
  const StepGraph two_parents{{{}, {0}, {0, 1}}};
  const auto m = graph_metrics(two_parents);
  CHECK(m.depth[2] == 2);
  // Enumerate every root-to-node path to cross-check.
  std::function<int(int)> longest = [&](int v) {
    int best = 0;
    for (int u : two_parents.parents_of[v]) best = std::max(best, longest(u) + 1);
    return best;
  };
  for (int v = 0; v < 3; ++v) CHECK(m.depth[v] == longest(v));
  CHECK(m.distance[0][2] == 1);

  const auto split = graph_metrics(StepGraph{{{}, {}}});
  CHECK(split.distance[0][1] == kDisconnected);
  CHECK(split.depth == std::vector<int>{0, 0});

  CHECK_THROWS_AS(graph_metrics(StepGraph{{{1}, {0}}}), InputError);
  CHECK_THROWS_AS(graph_metrics(StepGraph{{{4}}}), InputError);
}
