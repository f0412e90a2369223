#include "bcp/forest.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bcp {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("forest: " + what);
}

}  // namespace

Forest::Forest(int n_leaves) : n_leaves_(n_leaves) {
  if (n_leaves < 1) fail("need at least one leaf");
  nodes_.resize(static_cast<std::size_t>(n_leaves));
  for (int i = 0; i < n_leaves; ++i) {
    nodes_[static_cast<std::size_t>(i)].label = i + 1;
    nodes_[static_cast<std::size_t>(i)].alive = true;
    roots_.insert(i);
  }
  alive_count_ = n_leaves;
}

Forest::Forest(const std::vector<int>& leaf_labels)
    : Forest(static_cast<int>(leaf_labels.size())) {
  for (int i = 0; i < n_leaves_; ++i) {
    if (leaf_labels[static_cast<std::size_t>(i)] <= 0)
      fail("leaf labels must be positive");
    nodes_[static_cast<std::size_t>(i)].label =
        leaf_labels[static_cast<std::size_t>(i)];
  }
}

void Forest::require_alive(int u) const {
  if (u < 0 || u >= slot_count() || !nodes_[static_cast<std::size_t>(u)].alive)
    fail("node " + std::to_string(u) + " is not alive");
}

bool Forest::alive(int u) const {
  return u >= 0 && u < slot_count() && nodes_[static_cast<std::size_t>(u)].alive;
}

bool Forest::is_leaf(int u) const {
  require_alive(u);
  return nodes_[static_cast<std::size_t>(u)].label > 0;
}

bool Forest::is_root(int u) const {
  require_alive(u);
  return nodes_[static_cast<std::size_t>(u)].parent < 0;
}

int Forest::parent(int u) const {
  require_alive(u);
  return nodes_[static_cast<std::size_t>(u)].parent;
}

int Forest::sister(int u) const {
  require_alive(u);
  int p = nodes_[static_cast<std::size_t>(u)].parent;
  if (p < 0) return -1;
  const auto& kids = nodes_[static_cast<std::size_t>(p)].children;
  return kids[0] == u ? kids[1] : kids[0];
}

int Forest::label(int u) const {
  require_alive(u);
  return nodes_[static_cast<std::size_t>(u)].label;
}

double Forest::h_up(int u) const {
  require_alive(u);
  if (nodes_[static_cast<std::size_t>(u)].parent < 0) fail("root has no parent edge");
  return nodes_[static_cast<std::size_t>(u)].h_up;
}

const std::array<int, 2>& Forest::children(int u) const {
  require_alive(u);
  return nodes_[static_cast<std::size_t>(u)].children;
}

std::array<int, 2> Forest::reps(int u) const {
  require_alive(u);
  const auto& node = nodes_[static_cast<std::size_t>(u)];
  if (node.label > 0) return {u, u};
  return node.children;
}

int Forest::add_cherry(int v1, int w1, double l_v, double l_w) {
  if (v1 == w1) fail("cherry endpoints must be distinct");
  if (!alive(v1) || !is_root(v1)) fail("cherry endpoint is not a root");
  if (!alive(w1) || !is_root(w1)) fail("cherry endpoint is not a root");
  int id = slot_count();
  ForestNode fresh;
  fresh.alive = true;
  fresh.children = {v1, w1};
  nodes_.push_back(fresh);
  nodes_[static_cast<std::size_t>(v1)].parent = id;
  nodes_[static_cast<std::size_t>(v1)].h_up = l_v;
  nodes_[static_cast<std::size_t>(w1)].parent = id;
  nodes_[static_cast<std::size_t>(w1)].h_up = l_w;
  roots_.erase(v1);
  roots_.erase(w1);
  roots_.insert(id);
  ++alive_count_;
  return id;
}

std::vector<int> Forest::remove_collision(int v) {
  std::vector<int> removed;
  if (!alive(v) || is_root(v)) return removed;
  // Walk from v to the root, marking every proper ancestor for removal.
  int x = nodes_[static_cast<std::size_t>(v)].parent;
  while (x >= 0) {
    removed.push_back(x);
    x = nodes_[static_cast<std::size_t>(x)].parent;
  }
  // Detach the children of removed nodes; survivors become roots.
  for (int dead : removed) {
    for (int child : nodes_[static_cast<std::size_t>(dead)].children) {
      auto& cn = nodes_[static_cast<std::size_t>(child)];
      cn.parent = -1;
      cn.h_up = 0.0;
    }
  }
  int old_root = removed.back();
  roots_.erase(old_root);
  std::set<int> dead_set(removed.begin(), removed.end());
  for (int dead : removed) {
    for (int child : nodes_[static_cast<std::size_t>(dead)].children)
      if (!dead_set.count(child)) roots_.insert(child);
    auto& dn = nodes_[static_cast<std::size_t>(dead)];
    dn.alive = false;
    dn.parent = -1;
    dn.children = {-1, -1};
    --alive_count_;
  }
  return removed;
}

int Forest::tree_root_of(int u) const {
  require_alive(u);
  int x = u;
  while (nodes_[static_cast<std::size_t>(x)].parent >= 0)
    x = nodes_[static_cast<std::size_t>(x)].parent;
  return x;
}

std::vector<int> Forest::tree_nodes_bfs(int root) const {
  require_alive(root);
  std::vector<int> order{root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& node = nodes_[static_cast<std::size_t>(order[i])];
    if (node.label > 0) continue;
    order.push_back(node.children[0]);
    order.push_back(node.children[1]);
  }
  return order;
}

std::vector<int> Forest::leaf_labels_below(int u) const {
  std::vector<int> labels;
  for (int x : tree_nodes_bfs(u)) {
    int lab = nodes_[static_cast<std::size_t>(x)].label;
    if (lab > 0) labels.push_back(lab);
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

bool Forest::is_ancestor_or_self(int a, int v) const {
  require_alive(a);
  require_alive(v);
  int x = v;
  while (x >= 0) {
    if (x == a) return true;
    x = nodes_[static_cast<std::size_t>(x)].parent;
  }
  return false;
}

double Forest::h_path(int a, int b) const {
  require_alive(a);
  require_alive(b);
  if (a == b) fail("h_path needs distinct nodes");
  // Climb both nodes to a common ancestor, accumulating edge estimates.
  std::vector<int> a_chain;
  for (int x = a; x >= 0; x = nodes_[static_cast<std::size_t>(x)].parent)
    a_chain.push_back(x);
  double b_sum = 0.0;
  int meet = -1;
  for (int x = b; x >= 0; x = nodes_[static_cast<std::size_t>(x)].parent) {
    if (std::find(a_chain.begin(), a_chain.end(), x) != a_chain.end()) {
      meet = x;
      break;
    }
    b_sum += nodes_[static_cast<std::size_t>(x)].h_up;
  }
  if (meet < 0) fail("h_path nodes lie in different trees");
  if (meet == a || meet == b) fail("h_path is undefined for ancestor pairs");
  double a_sum = 0.0;
  for (int x = a; x != meet; x = nodes_[static_cast<std::size_t>(x)].parent)
    a_sum += nodes_[static_cast<std::size_t>(x)].h_up;
  return a_sum + b_sum;
}

}  // namespace bcp
