#include "bcp/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

#include "bcp/errors.hpp"

namespace bcp {

namespace {

constexpr double kSlack = 1e-9;

std::string node_text(int u) { return std::to_string(u); }

[[noreturn]] void violation(const std::string& claim, int iteration,
                            const std::string& detail) {
  throw AuditViolation("audit claim [" + claim + "] failed at iteration " +
                       std::to_string(iteration) + ": " + detail);
}

}  // namespace

TrueTreeOracle::TrueTreeOracle(const PhyloTree& t) : tree_(t) {
  tree_.check_valid(false);
  const int count = static_cast<int>(tree_.nodes.size());
  adjacency_.resize(static_cast<std::size_t>(count));
  for (int u = 0; u < count; ++u) {
    const auto& node = tree_.nodes[static_cast<std::size_t>(u)];
    if (node.parent >= 0) adjacency_[static_cast<std::size_t>(u)].push_back(node.parent);
    for (int c : node.children) adjacency_[static_cast<std::size_t>(u)].push_back(c);
  }
  // All-pairs path lengths; the length of an edge lives on its child node.
  dist_.assign(static_cast<std::size_t>(count),
               std::vector<double>(static_cast<std::size_t>(count), 0.0));
  for (int s = 0; s < count; ++s) {
    auto& row = dist_[static_cast<std::size_t>(s)];
    std::vector<char> seen(static_cast<std::size_t>(count), 0);
    std::deque<int> queue{s};
    seen[static_cast<std::size_t>(s)] = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adjacency_[static_cast<std::size_t>(u)]) {
        if (seen[static_cast<std::size_t>(v)]) continue;
        seen[static_cast<std::size_t>(v)] = 1;
        int lower = tree_.nodes[static_cast<std::size_t>(v)].parent == u ? v : u;
        row[static_cast<std::size_t>(v)] =
            row[static_cast<std::size_t>(u)] +
            tree_.nodes[static_cast<std::size_t>(lower)].length;
        queue.push_back(v);
      }
    }
  }
}

double TrueTreeOracle::dist(int a, int b) const {
  return dist_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

int TrueTreeOracle::leaf_node(int label) const {
  int u = tree_.node_by_label(label);
  if (u < 0)
    throw std::invalid_argument("reference tree has no leaf labeled " +
                                std::to_string(label));
  return u;
}

int TrueTreeOracle::median(int a, int b, int c) const {
  double target = 0.5 * (dist(a, b) + dist(a, c) - dist(b, c));
  double walked = 0.0;
  int prev = -1;
  for (int u : path_nodes(tree_, a, b)) {
    if (prev >= 0) {
      int lower = tree_.nodes[static_cast<std::size_t>(u)].parent == prev ? u : prev;
      walked += tree_.nodes[static_cast<std::size_t>(lower)].length;
    }
    if (std::abs(walked - target) < kSlack) return u;
    prev = u;
  }
  throw std::logic_error("branch point fell between vertices");
}

std::vector<int> TrueTreeOracle::path_edges(int a, int b) const {
  std::vector<int> edges;
  int prev = -1;
  for (int u : path_nodes(tree_, a, b)) {
    if (prev >= 0)
      edges.push_back(tree_.nodes[static_cast<std::size_t>(u)].parent == prev ? u
                                                                              : prev);
    prev = u;
  }
  return edges;
}

const std::vector<int>& TrueTreeOracle::neighbors(int u) const {
  return adjacency_[static_cast<std::size_t>(u)];
}

Auditor::Auditor(const PhyloTree& true_tree, const AlgoParams& params)
    : oracle_(true_tree), params_(params) {}

void Auditor::init_leaf_positions(const Forest& f) {
  pos_.assign(static_cast<std::size_t>(f.slot_count()), -1);
  for (int u = 0; u < f.leaf_count(); ++u)
    pos_[static_cast<std::size_t>(u)] = oracle_.leaf_node(f.label(u));
}

void Auditor::note_cherry(int u1, int v1, int w1, int z0) {
  if (u1 >= static_cast<int>(pos_.size()))
    pos_.resize(static_cast<std::size_t>(u1) + 1, -1);
  pos_[static_cast<std::size_t>(u1)] = oracle_.median(pos(v1), pos(w1), pos(z0));
}

int Auditor::pos(int u) const {
  if (u < 0 || u >= static_cast<int>(pos_.size()) ||
      pos_[static_cast<std::size_t>(u)] < 0)
    throw std::logic_error("no reference position for node " + node_text(u));
  return pos_[static_cast<std::size_t>(u)];
}

std::set<int> Auditor::span_edges(const Forest& f, int subtree_root) const {
  std::set<int> edges;
  for (int x : f.tree_nodes_bfs(subtree_root)) {
    if (x == subtree_root) continue;
    for (int e : oracle_.path_edges(pos(f.parent(x)), pos(x))) edges.insert(e);
  }
  return edges;
}

std::set<int> Auditor::span_vertices(const Forest& f, int tree_root) const {
  std::set<int> vertices{pos(tree_root)};
  for (int x : f.tree_nodes_bfs(tree_root)) {
    if (x == tree_root) continue;
    for (int v : path_nodes(oracle_.tree(), pos(f.parent(x)), pos(x)))
      vertices.insert(v);
  }
  return vertices;
}

double Auditor::tree_gap(const Forest& f, int root_a, int root_b) const {
  double best = std::numeric_limits<double>::infinity();
  for (int x : span_vertices(f, root_a))
    for (int y : span_vertices(f, root_b)) best = std::min(best, oracle_.dist(x, y));
  return best;
}

bool Auditor::collides_at(const Forest& f, int root_a, int root_b, int v2) const {
  std::vector<int> inter = oracle_.path_edges(pos(root_a), pos(root_b));
  std::set<int> path(inter.begin(), inter.end());
  bool touches_entry = false;
  for (int e : oracle_.path_edges(pos(f.parent(v2)), pos(v2)))
    if (path.count(e)) touches_entry = true;
  if (!touches_entry) return false;
  for (int e : span_edges(f, v2))
    if (path.count(e)) return false;
  return true;
}

void Auditor::check_invariants(const Forest& f, int iteration) const {
  std::vector<int> roots(f.roots().begin(), f.roots().end());

  // Per-tree embedding: every forest edge maps onto a reference path, no
  // reference edge is covered twice, lengths stay short and well estimated.
  std::vector<std::set<int>> spans;
  spans.reserve(roots.size());
  for (int r : roots) {
    std::set<int> span;
    for (int x : f.tree_nodes_bfs(r)) {
      if (x == r) continue;
      double true_len = oracle_.dist(pos(f.parent(x)), pos(x));
      if (!(true_len <= params_.g_prime + kSlack))
        violation("edge lengths", iteration,
                  "edge above node " + node_text(x) + " has true length " +
                      std::to_string(true_len) + " > g' = " +
                      std::to_string(params_.g_prime));
      if (!(std::abs(f.h_up(x) - true_len) <= params_.eps / 16.0 + kSlack))
        violation("weight estimation", iteration,
                  "edge above node " + node_text(x) + " estimated " +
                      std::to_string(f.h_up(x)) + " vs true " +
                      std::to_string(true_len));
      for (int e : oracle_.path_edges(pos(f.parent(x)), pos(x)))
        if (!span.insert(e).second)
          violation("legal subforest", iteration,
                    "tree at root " + node_text(r) +
                        " covers a reference edge twice");
    }
    spans.push_back(std::move(span));
  }
  for (std::size_t i = 0; i < spans.size(); ++i)
    for (std::size_t j = i + 1; j < spans.size(); ++j)
      for (int e : spans[i])
        if (spans[j].count(e))
          violation("legal subforest", iteration,
                    "trees at roots " + node_text(roots[i]) + " and " +
                        node_text(roots[j]) + " share a reference edge");

  // No tree may collide into another within r_col.
  for (int a : roots)
    for (int b : roots) {
      if (a == b || f.is_leaf(b)) continue;
      bool collides = false;
      int where = -1;
      for (int v2 : f.tree_nodes_bfs(b)) {
        if (v2 == b) continue;
        if (collides_at(f, a, b, v2)) {
          collides = true;
          where = v2;
          break;
        }
      }
      if (!collides) continue;
      double gap = tree_gap(f, a, b);
      if (gap <= params_.r_col + kSlack)
        violation("collisions", iteration,
                  "tree at root " + node_text(a) + " collides into tree at root " +
                      node_text(b) + " at the edge above node " +
                      node_text(where) + " within gap " + std::to_string(gap));
    }
}

void Auditor::check_genuine_collision(const Forest& f, int u0, int u1, int z,
                                      int iteration) const {
  for (int v2 : f.tree_nodes_bfs(z))
    if (collides_at(f, u0, u1, v2)) return;
  violation("removal", iteration,
            "no genuine collision from the tree at root " + node_text(u0) +
                " at or below node " + node_text(z) + " in the tree at root " +
                node_text(u1));
}

std::set<int> Auditor::fixed_nodes(const Forest& f) const {
  std::set<int> fixed;
  std::vector<char> full_sub(static_cast<std::size_t>(f.slot_count()), 0);
  auto adjacent = [&](int x, int y) {
    const auto& around = oracle_.neighbors(x);
    return std::find(around.begin(), around.end(), y) != around.end();
  };
  for (int r : f.roots()) {
    std::vector<int> order = f.tree_nodes_bfs(r);
    // Children first: decide for each non-root node whether its subtree maps
    // node-for-node onto the reference component hanging off its parent's
    // vertex.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int x = *it;
      if (x == r) continue;
      int toward_parent = pos(f.parent(x));
      const auto& around = oracle_.neighbors(pos(x));
      if (f.is_leaf(x)) {
        full_sub[static_cast<std::size_t>(x)] =
            around.size() == 1 && around[0] == toward_parent;
        continue;
      }
      const auto& kids = f.children(x);
      bool ok = adjacent(pos(x), toward_parent) &&
                full_sub[static_cast<std::size_t>(kids[0])] &&
                full_sub[static_cast<std::size_t>(kids[1])] &&
                around.size() == 3 && pos(kids[0]) != pos(kids[1]) &&
                pos(kids[0]) != toward_parent && pos(kids[1]) != toward_parent;
      full_sub[static_cast<std::size_t>(x)] = ok ? 1 : 0;
    }
    // A node is fixed when its subtree is fully reconstructed: obtainable
    // from the reference tree by cutting at most one edge at its vertex.
    for (int x : order) {
      if (f.is_leaf(x)) {
        fixed.insert(x);
        continue;
      }
      const auto& kids = f.children(x);
      if (full_sub[static_cast<std::size_t>(kids[0])] &&
          full_sub[static_cast<std::size_t>(kids[1])] &&
          pos(kids[0]) != pos(kids[1]) && oracle_.neighbors(pos(x)).size() <= 3)
        fixed.insert(x);
    }
  }
  return fixed;
}

void Auditor::check_fixed_progress(const Forest& f, int iteration,
                                   bool is_final) {
  std::set<int> now = fixed_nodes(f);
  if (have_baseline_) {
    for (int u : fixed_)
      if (!now.count(u))
        violation("fixed progress", iteration,
                  "node " + node_text(u) + " left the fixed subforest");
    if (!is_final && now.size() <= fixed_.size())
      violation("fixed progress", iteration,
                "fixed subforest did not grow (" + std::to_string(fixed_.size()) +
                    " -> " + std::to_string(now.size()) + ")");
  }
  fixed_ = std::move(now);
  have_baseline_ = true;
}

}  // namespace bcp
