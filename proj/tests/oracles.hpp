#pragma once

// Test-only reference routines. They deliberately avoid the library's code
// paths (no LCA climbing, no SVD, no LDLT).

#include <cmath>
#include <deque>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "hprobe/tree.hpp"

namespace oracle {

// Undirected adjacency over labels, from retained positions only.
inline std::map<int, std::vector<int>> adjacency(const hprobe::LabeledTree& tree) {
  std::map<int, std::vector<int>> adj;
  for (int q : tree.positions()) {
    adj[tree.label_of(q)];
    if (q > 0) {
      const int a = tree.label_of(q);
      const int b = tree.label_of((q - 1) / 2);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  return adj;
}

// BFS parents from `source`; returns hop distances and predecessor map.
inline std::map<int, int> bfs_distances(const std::map<int, std::vector<int>>& adj, int source,
                                        std::map<int, int>* predecessor = nullptr) {
  std::map<int, int> dist{{source, 0}};
  std::deque<int> queue{source};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj.at(u)) {
      if (!dist.count(v)) {
        dist[v] = dist[u] + 1;
        if (predecessor) (*predecessor)[v] = u;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

inline std::vector<int> bfs_path(const std::map<int, std::vector<int>>& adj, int a, int b) {
  std::map<int, int> pred;
  bfs_distances(adj, a, &pred);
  std::vector<int> rev{b};
  while (rev.back() != a) rev.push_back(pred.at(rev.back()));
  return {rev.rbegin(), rev.rend()};
}

// Classical Gram-Schmidt (twice) on the columns; drops near-dependent ones.
inline Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& cols, double tol = 1e-9) {
  std::vector<Eigen::VectorXd> kept;
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    Eigen::VectorXd v = cols.col(c);
    const double scale = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) v -= q.dot(v) * q;
    }
    if (v.norm() > tol * std::max(1.0, scale)) kept.push_back(v / v.norm());
  }
  Eigen::MatrixXd out(cols.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = kept[i];
  return out;
}

// Gaussian elimination with partial pivoting on a small dense system.
inline Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const auto n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    }
    a.row(k).swap(a.row(pivot));
    std::swap(b(k), b(pivot));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a.row(i) -= f * a.row(k);
      b(i) -= f * b(k);
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x(j);
    x(i) = s / a(i, i);
  }
  return x;
}

}  // namespace oracle
