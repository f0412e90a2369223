#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bcp {

// Rooted representation of a phylogenetic tree.  Unrooted trees are held as a
// tree hung from an internal node with three children (the usual virtual-root
// convention); `rooted` records which reading is meant.  Leaf labels are
// positive integers; internal nodes carry label 0.
struct TreeNode {
  int parent = -1;
  std::vector<int> children;
  double length = 0.0;  // branch length to parent (meaningless at the root)
  int label = 0;
};

struct PhyloTree {
  std::vector<TreeNode> nodes;
  int root = -1;
  bool rooted = false;

  bool is_leaf(int v) const { return nodes[v].children.empty(); }
  int leaf_count() const;
  // Leaf node ids ordered by label.
  std::vector<int> leaves() const;
  int node_by_label(int label) const;  // -1 when absent
  int edge_count() const;
  // Throws std::runtime_error when the structure is malformed (bad parent
  // links, duplicate labels, negative lengths, or non-binary internal nodes
  // when require_binary is set).
  void check_valid(bool require_binary = true) const;
};

// --- Newick ---------------------------------------------------------------
//
// Dialect: leaf names are decimal integers, branch lengths are mandatory on
// every non-top node and forbidden on the top node, and both rooted
// "(A,B);" and unrooted "(A,B,C);" top-level arities are accepted.  Errors
// carry the byte offset of the offending token.  With `permissive`,
// multifurcating internal nodes are allowed.
PhyloTree newick_parse(std::string_view text, bool permissive = false);

// Canonical form: unrooted trees are re-hung on the neighbour of the
// smallest-labelled leaf, children are ordered by smallest descendant leaf
// label, and lengths print as shortest round-trip decimals.  Equal topologies
// with equal lengths therefore serialize identically.
std::string newick_write(const PhyloTree& t);

// --- Paths and restriction -------------------------------------------------

// Same tree (ids, labels, lengths preserved) hung from new_root.
PhyloTree rehang(const PhyloTree& t, int new_root);

double path_distance(const PhyloTree& t, int a, int b);
// Nodes along the path from a to b, inclusive.
std::vector<int> path_nodes(const PhyloTree& t, int a, int b);

struct RestrictResult {
  PhyloTree tree;
  std::unordered_map<int, int> old_to_new;  // only nodes retained by the result
};

// Topological restriction: keep exactly the nodes/edges lying on paths
// between members of `keep`, then contract degree-2 nodes not in `keep`
// (summing branch lengths).  Distances between retained nodes are preserved.
// The result is rooted at `root_at` (which must be in `keep`) or at the
// smallest retained input id.
RestrictResult restrict_tree(const PhyloTree& t, const std::vector<int>& keep,
                             int root_at = -1);

// --- Quartets ---------------------------------------------------------------

struct QuartetSplit {
  std::array<int, 2> side1;  // input node ids, each side sorted ascending
  std::array<int, 2> side2;  // side1 holds the smallest id
  double internal_length = 0.0;
};

// The split induced by restricting to four distinct nodes; nullopt when the
// quartet is degenerate (one member lies on a path between two others, or the
// restriction is a star).
std::optional<QuartetSplit> true_quartet_split(const PhyloTree& t,
                                               const std::array<int, 4>& q);

// --- Edge sets --------------------------------------------------------------

// Edges (identified by child node id) lying on some path between two members
// of `nodes`, i.e. the edge set of the Steiner subtree.
std::vector<int> steiner_edges(const PhyloTree& t, const std::vector<int>& nodes);

// True when no tree edge lies on both a path between members of `a` and a
// path between members of `b`.
bool are_edge_disjoint(const PhyloTree& t, const std::vector<int>& a,
                       const std::vector<int>& b);

// --- Robinson-Foulds --------------------------------------------------------

// Symmetric-difference count of nontrivial bipartitions of the leaf label
// set; both trees are read as unrooted and must carry identical label sets.
int rf_distance(const PhyloTree& a, const PhyloTree& b);

}  // namespace bcp
