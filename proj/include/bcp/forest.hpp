#pragma once

#include <array>
#include <set>
#include <vector>

namespace bcp {

// Growing rooted subforest over the working node ids.  The n original leaves
// occupy ids 0..n-1 (carrying their positive labels); cherry nodes get fresh
// ids that are never reused, so per-node caches stay valid across removals.
struct ForestNode {
  int parent = -1;
  std::array<int, 2> children = {-1, -1};
  int label = 0;      // positive for original leaves, 0 for cherry nodes
  bool alive = false;
  double h_up = 0.0;  // length estimate of the edge to the parent
};

class Forest {
 public:
  explicit Forest(int n_leaves);  // leaf ids 0..n-1 carry labels 1..n
  explicit Forest(const std::vector<int>& leaf_labels);

  int slot_count() const { return static_cast<int>(nodes_.size()); }
  int leaf_count() const { return n_leaves_; }
  bool alive(int u) const;
  bool is_leaf(int u) const;
  bool is_root(int u) const;  // alive with no parent
  int parent(int u) const;
  int sister(int u) const;  // the parent's other child; -1 at a root
  int label(int u) const;
  double h_up(int u) const;
  const std::array<int, 2>& children(int u) const;
  // The usual representative pair: the two children, or {u, u} for a leaf.
  std::array<int, 2> reps(int u) const;
  // Roots in ascending id order (the deterministic scan order everywhere).
  const std::set<int>& roots() const { return roots_; }
  int root_count() const { return static_cast<int>(roots_.size()); }
  int alive_count() const { return alive_count_; }

  // Joins two roots under a fresh node with the given edge-length estimates;
  // returns the new root's id.  Throws when the arguments are not distinct
  // roots.
  int add_cherry(int v1, int w1, double l_v, double l_w);

  // Removes every ancestor of v (up to and including its tree's root) and the
  // edges below them; v's subtree and all detached sibling subtrees become
  // roots.  No-op when v is absent or already a root.  Returns the removed
  // ids.
  std::vector<int> remove_collision(int v);

  int tree_root_of(int u) const;
  // BFS order from the root, children in stored order.
  std::vector<int> tree_nodes_bfs(int root) const;
  std::vector<int> leaf_labels_below(int u) const;
  bool is_ancestor_or_self(int a, int v) const;
  // Sum of h over the path between two distinct nodes of one tree; neither
  // node may be an ancestor of the other (such pairs are never stored in the
  // working metric).
  double h_path(int a, int b) const;

 private:
  std::vector<ForestNode> nodes_;
  std::set<int> roots_;
  int n_leaves_ = 0;
  int alive_count_ = 0;

  void require_alive(int u) const;
};

}  // namespace bcp
