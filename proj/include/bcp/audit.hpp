#pragma once

#include <set>
#include <vector>

#include "bcp/forest.hpp"
#include "bcp/params.hpp"
#include "bcp/tree.hpp"

namespace bcp {

// Fast queries against a reference tree: true path distances, branch points,
// and the tree-edge sets that forest edges map onto.  Edges are named by
// their child node id (relative to the stored root).
class TrueTreeOracle {
 public:
  explicit TrueTreeOracle(const PhyloTree& t);

  const PhyloTree& tree() const { return tree_; }
  double dist(int a, int b) const;
  int leaf_node(int label) const;  // throws when the label is absent
  // The unique vertex shared by the three pairwise paths.
  int median(int a, int b, int c) const;
  std::vector<int> path_edges(int a, int b) const;
  const std::vector<int>& neighbors(int u) const;

 private:
  PhyloTree tree_;
  std::vector<std::vector<double>> dist_;
  std::vector<std::vector<int>> adjacency_;
};

// Checks the forest invariants that hold under accurate local estimates:
// every tree embeds into the reference tree edge-disjointly, edge lengths
// stay short and well estimated, surviving trees do not collide nearby,
// removals target genuine collisions, and the fixed part of the forest only
// grows.  Violations throw AuditViolation naming the broken claim.
class Auditor {
 public:
  Auditor(const PhyloTree& true_tree, const AlgoParams& params);

  const TrueTreeOracle& oracle() const { return oracle_; }

  // Position bookkeeping: forest node -> reference-tree vertex.
  void init_leaf_positions(const Forest& f);
  // A new cherry root sits at the branch point of its children and the
  // reference node used for the length measurements.
  void note_cherry(int u1, int v1, int w1, int z0);
  int pos(int u) const;

  // Claims checked at the end of every iteration (the state seen by the next
  // one): legal subforest, edge lengths, weight estimation, no collision
  // within r_col.
  void check_invariants(const Forest& f, int iteration) const;

  // Called at removal time: the detected node z in u1's tree must sit at or
  // directly above a genuine collision coming from u0's tree.
  void check_genuine_collision(const Forest& f, int u0, int u1, int z,
                               int iteration) const;

  // Fixed-subforest progress: the fixed node set never loses members, and
  // grows strictly on every iteration that loops back.
  void check_fixed_progress(const Forest& f, int iteration, bool is_final);
  int last_fixed_count() const { return static_cast<int>(fixed_.size()); }

  std::set<int> fixed_nodes(const Forest& f) const;

 private:
  TrueTreeOracle oracle_;
  AlgoParams params_;
  std::vector<int> pos_;
  std::set<int> fixed_;
  bool have_baseline_ = false;

  std::set<int> span_edges(const Forest& f, int subtree_root) const;
  std::set<int> span_vertices(const Forest& f, int tree_root) const;
  double tree_gap(const Forest& f, int root_a, int root_b) const;
  bool collides_at(const Forest& f, int root_a, int root_b, int v2) const;
};

}  // namespace bcp
