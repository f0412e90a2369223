#include "bcp/tree.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace bcp {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

std::string offset_msg(const char* what, std::size_t pos) {
  return std::string(what) + " at byte " + std::to_string(pos);
}

}  // namespace

int PhyloTree::leaf_count() const {
  int n = 0;
  for (const auto& nd : nodes)
    if (nd.children.empty()) ++n;
  return n;
}

std::vector<int> PhyloTree::leaves() const {
  std::vector<int> ids;
  for (int v = 0; v < static_cast<int>(nodes.size()); ++v)
    if (nodes[v].children.empty()) ids.push_back(v);
  std::sort(ids.begin(), ids.end(),
            [&](int a, int b) { return nodes[a].label < nodes[b].label; });
  return ids;
}

int PhyloTree::node_by_label(int label) const {
  if (label <= 0) return -1;
  for (int v = 0; v < static_cast<int>(nodes.size()); ++v)
    if (nodes[v].label == label) return v;
  return -1;
}

int PhyloTree::edge_count() const {
  return static_cast<int>(nodes.size()) - 1;
}

void PhyloTree::check_valid(bool require_binary) const {
  if (root < 0 || root >= static_cast<int>(nodes.size()))
    fail("tree has no valid root");
  std::vector<int> seen_labels;
  int reached = 0;
  std::vector<int> stack = {root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    ++reached;
    const TreeNode& nd = nodes[v];
    if (nd.length < 0.0) fail("negative branch length");
    if (nd.children.empty()) {
      if (nd.label <= 0) fail("leaf without positive label");
      seen_labels.push_back(nd.label);
    }
    for (int c : nd.children) {
      if (c < 0 || c >= static_cast<int>(nodes.size()) || nodes[c].parent != v)
        fail("broken parent link");
      stack.push_back(c);
    }
  }
  if (reached != static_cast<int>(nodes.size()))
    fail("tree contains unreachable nodes");
  std::sort(seen_labels.begin(), seen_labels.end());
  for (std::size_t i = 1; i < seen_labels.size(); ++i)
    if (seen_labels[i] == seen_labels[i - 1]) fail("duplicate leaf label");
  if (require_binary && leaf_count() >= 3) {
    for (int v = 0; v < static_cast<int>(nodes.size()); ++v) {
      const auto& nd = nodes[v];
      if (nd.children.empty()) continue;
      std::size_t want = (v == root) ? (rooted ? 2 : 3) : 2;
      if (nd.children.size() != want) fail("non-binary internal node");
    }
  }
}

// --- Newick parser ----------------------------------------------------------

namespace {

class NewickParser {
 public:
  NewickParser(std::string_view text, bool permissive)
      : text_(text), permissive_(permissive) {}

  PhyloTree parse() {
    skip_ws();
    int top = parse_node(/*is_top=*/true);
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != ';')
      fail(offset_msg("expected ';'", pos_));
    ++pos_;
    skip_ws();
    if (pos_ != text_.size())
      fail(offset_msg("trailing characters after ';'", pos_));
    tree_.root = top;
    std::size_t top_children = tree_.nodes[top].children.size();
    // Two-leaf trees are the single-edge tree however they are written.
    tree_.rooted = (top_children == 2) && tree_.leaf_count() > 2;
    tree_.check_valid(!permissive_);
    return std::move(tree_);
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  int new_node() {
    tree_.nodes.emplace_back();
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  int parse_node(bool is_top) {
    skip_ws();
    int v;
    if (peek() == '(') {
      std::size_t open_pos = pos_;
      ++pos_;
      v = new_node();
      std::vector<int> children;
      while (true) {
        int c = parse_node(false);
        children.push_back(c);
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail(offset_msg("expected ',' or ')'", pos_));
      }
      if (children.size() == 1)
        fail(offset_msg("internal node with a single child", open_pos));
      if (!permissive_) {
        std::size_t limit = is_top ? 3 : 2;
        if (children.size() > limit)
          fail(offset_msg("non-binary node (pass permissive to allow)",
                          open_pos));
      }
      for (int c : children) tree_.nodes[c].parent = v;
      tree_.nodes[v].children = std::move(children);
      skip_ws();
      if (std::isdigit(static_cast<unsigned char>(peek())))
        fail(offset_msg("internal node labels are not supported", pos_));
    } else if (std::isdigit(static_cast<unsigned char>(peek()))) {
      std::size_t start = pos_;
      long label = 0;
      auto res =
          std::from_chars(text_.data() + pos_, text_.data() + text_.size(), label);
      if (res.ec != std::errc()) fail(offset_msg("bad leaf label", start));
      pos_ = res.ptr - text_.data();
      if (label <= 0) fail(offset_msg("leaf labels must be positive", start));
      v = new_node();
      tree_.nodes[v].label = static_cast<int>(label);
    } else {
      fail(offset_msg("leaf names must be decimal integers", pos_));
    }
    skip_ws();
    if (peek() == ':') {
      std::size_t colon_pos = pos_;
      if (is_top)
        fail(offset_msg("branch length not allowed on the top node", colon_pos));
      ++pos_;
      skip_ws();
      std::size_t start = pos_;
      double len = 0.0;
      auto res =
          std::from_chars(text_.data() + pos_, text_.data() + text_.size(), len);
      if (res.ec != std::errc()) fail(offset_msg("bad branch length", start));
      pos_ = res.ptr - text_.data();
      if (len < 0.0) fail(offset_msg("negative branch length", start));
      tree_.nodes[v].length = len;
    } else if (!is_top) {
      fail(offset_msg("missing branch length", pos_));
    }
    return v;
  }

  std::string_view text_;
  bool permissive_;
  std::size_t pos_ = 0;
  PhyloTree tree_;
};

}  // namespace

PhyloTree newick_parse(std::string_view text, bool permissive) {
  return NewickParser(text, permissive).parse();
}

// --- Newick writer ----------------------------------------------------------

namespace {

std::string format_length(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int min_label_below(const PhyloTree& t, int v, std::vector<int>& memo) {
  if (memo[v] != 0) return memo[v];
  int best = t.nodes[v].children.empty() ? t.nodes[v].label
                                         : std::numeric_limits<int>::max();
  for (int c : t.nodes[v].children)
    best = std::min(best, min_label_below(t, c, memo));
  return memo[v] = best;
}

void write_node(const PhyloTree& t, int v, std::vector<int>& memo, bool is_top,
                std::string& out) {
  const TreeNode& nd = t.nodes[v];
  if (nd.children.empty()) {
    out += std::to_string(nd.label);
  } else {
    std::vector<int> order = nd.children;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return min_label_below(t, a, memo) < min_label_below(t, b, memo);
    });
    out += '(';
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i) out += ',';
      write_node(t, order[i], memo, false, out);
    }
    out += ')';
  }
  if (!is_top) {
    out += ':';
    out += format_length(nd.length);
  }
}

}  // namespace

PhyloTree rehang(const PhyloTree& t, int new_root) {
  int n = static_cast<int>(t.nodes.size());
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (int v = 0; v < n; ++v) {
    if (t.nodes[v].parent >= 0) {
      adj[v].push_back({t.nodes[v].parent, t.nodes[v].length});
      adj[t.nodes[v].parent].push_back({v, t.nodes[v].length});
    }
  }
  PhyloTree out;
  out.nodes.resize(n);
  out.root = new_root;
  out.rooted = t.rooted;
  for (int v = 0; v < n; ++v) out.nodes[v].label = t.nodes[v].label;
  std::vector<int> stack = {new_root};
  std::vector<char> visited(n, 0);
  visited[new_root] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (auto [u, len] : adj[v]) {
      if (visited[u]) continue;
      visited[u] = 1;
      out.nodes[u].parent = v;
      out.nodes[u].length = len;
      out.nodes[v].children.push_back(u);
      stack.push_back(u);
    }
  }
  return out;
}

std::string newick_write(const PhyloTree& t) {
  PhyloTree canon = t;
  if (!t.rooted && t.leaf_count() >= 3) {
    // Hang the unrooted tree from the neighbour of the smallest-labelled leaf.
    int best_leaf = -1;
    for (int v = 0; v < static_cast<int>(t.nodes.size()); ++v)
      if (t.nodes[v].children.empty() &&
          (best_leaf < 0 || t.nodes[v].label < t.nodes[best_leaf].label))
        best_leaf = v;
    int hub = t.nodes[best_leaf].parent;
    if (hub < 0) hub = t.nodes[best_leaf].children.at(0);
    canon = rehang(t, hub);
  } else if (canon.nodes[canon.root].label > 0 &&
             !canon.nodes[canon.root].children.empty()) {
    // A labelled root (as produced by restriction to two nodes): normalize to
    // a top node carrying the old root as a zero-length child.
    int old_root = canon.root;
    int top = static_cast<int>(canon.nodes.size());
    canon.nodes.emplace_back();
    canon.nodes[top].children = canon.nodes[old_root].children;
    for (int c : canon.nodes[top].children) canon.nodes[c].parent = top;
    canon.nodes[old_root].children.clear();
    canon.nodes[old_root].parent = top;
    canon.nodes[old_root].length = 0.0;
    canon.nodes[top].children.push_back(old_root);
    canon.root = top;
  }
  std::vector<int> memo(canon.nodes.size(), 0);
  std::string out;
  write_node(canon, canon.root, memo, true, out);
  out += ';';
  return out;
}

// --- Paths ------------------------------------------------------------------

std::vector<int> path_nodes(const PhyloTree& t, int a, int b) {
  if (a < 0 || b < 0 || a >= static_cast<int>(t.nodes.size()) ||
      b >= static_cast<int>(t.nodes.size()))
    fail("path endpoint outside the tree");
  std::vector<int> up_a, up_b;
  for (int v = a; v >= 0; v = t.nodes[v].parent) up_a.push_back(v);
  for (int v = b; v >= 0; v = t.nodes[v].parent) up_b.push_back(v);
  // Both end at the root; drop the shared tail beyond the meeting point.
  int i = static_cast<int>(up_a.size()) - 1;
  int j = static_cast<int>(up_b.size()) - 1;
  while (i > 0 && j > 0 && up_a[i - 1] == up_b[j - 1]) {
    --i;
    --j;
  }
  std::vector<int> out(up_a.begin(), up_a.begin() + i + 1);
  for (--j; j >= 0; --j) out.push_back(up_b[j]);
  return out;
}

double path_distance(const PhyloTree& t, int a, int b) {
  if (a == b) return 0.0;
  auto nodes = path_nodes(t, a, b);
  double d = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    int u = nodes[i], v = nodes[i + 1];
    d += (t.nodes[u].parent == v) ? t.nodes[u].length : t.nodes[v].length;
  }
  return d;
}

// --- Steiner edges and restriction -------------------------------------------

std::vector<int> steiner_edges(const PhyloTree& t, const std::vector<int>& nodes) {
  int n = static_cast<int>(t.nodes.size());
  std::vector<int> cnt(n, 0);
  for (int v : nodes) cnt[v] += 1;
  int total = static_cast<int>(nodes.size());
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack = {t.root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : t.nodes[v].children) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int c : t.nodes[*it].children) cnt[*it] += cnt[c];
  // An edge lies on a member-to-member path iff both of its sides contain
  // members.
  std::vector<int> edges;
  for (int v = 0; v < n; ++v) {
    if (v == t.root) continue;
    if (cnt[v] >= 1 && total - cnt[v] >= 1) edges.push_back(v);
  }
  return edges;
}

bool are_edge_disjoint(const PhyloTree& t, const std::vector<int>& a,
                       const std::vector<int>& b) {
  auto ea = steiner_edges(t, a);
  auto eb = steiner_edges(t, b);
  std::vector<char> in_a(t.nodes.size(), 0);
  for (int e : ea) in_a[e] = 1;
  for (int e : eb)
    if (in_a[e]) return false;
  return true;
}

RestrictResult restrict_tree(const PhyloTree& t, const std::vector<int>& keep,
                             int root_at) {
  if (keep.empty()) fail("restriction to an empty node set");
  for (int v : keep)
    if (v < 0 || v >= static_cast<int>(t.nodes.size()))
      fail("restriction to a node id outside the tree");
  std::vector<char> is_kept(t.nodes.size(), 0);
  for (int v : keep) is_kept[v] = 1;
  if (root_at >= 0 && !is_kept[root_at])
    fail("restriction root must belong to the kept set");

  auto edges = steiner_edges(t, keep);
  std::vector<std::vector<std::pair<int, double>>> adj(t.nodes.size());
  for (int v : edges) {
    int p = t.nodes[v].parent;
    adj[v].push_back({p, t.nodes[v].length});
    adj[p].push_back({v, t.nodes[v].length});
  }

  // Retained nodes: kept ones plus junctions of the Steiner subtree.
  std::vector<char> retained(t.nodes.size(), 0);
  for (std::size_t v = 0; v < t.nodes.size(); ++v)
    retained[v] = is_kept[v] || adj[v].size() >= 3;

  int start = root_at >= 0 ? root_at : *std::min_element(keep.begin(), keep.end());

  RestrictResult res;
  auto new_id = [&](int old) {
    auto it = res.old_to_new.find(old);
    if (it != res.old_to_new.end()) return it->second;
    int id = static_cast<int>(res.tree.nodes.size());
    res.tree.nodes.emplace_back();
    res.tree.nodes[id].label = t.nodes[old].label;
    res.old_to_new.emplace(old, id);
    return id;
  };

  res.tree.root = new_id(start);
  res.tree.rooted = false;
  // Walk outward from each retained node, contracting pass-through nodes.
  std::vector<std::pair<int, int>> walk = {{start, -1}};  // (old id, came-from)
  while (!walk.empty()) {
    auto [v, from] = walk.back();
    walk.pop_back();
    for (auto [u0, len0] : adj[v]) {
      if (u0 == from) continue;
      int prev = v, u = u0;
      double len = len0;
      while (!retained[u]) {
        // Non-retained Steiner nodes have degree exactly 2: step through.
        for (auto [w, lw] : adj[u]) {
          if (w != prev) {
            prev = u;
            u = w;
            len += lw;
            break;
          }
        }
      }
      int pv = res.old_to_new.at(v);
      int pu = new_id(u);
      res.tree.nodes[pu].parent = pv;
      res.tree.nodes[pu].length = len;
      res.tree.nodes[pv].children.push_back(pu);
      walk.push_back({u, prev});
    }
  }
  return res;
}

// --- Quartet split ----------------------------------------------------------

std::optional<QuartetSplit> true_quartet_split(const PhyloTree& t,
                                               const std::array<int, 4>& q) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (q[i] == q[j]) fail("quartet with repeated nodes");
  auto res = restrict_tree(t, {q[0], q[1], q[2], q[3]});
  const PhyloTree& r = res.tree;
  std::vector<int> deg(r.nodes.size(), 0);
  for (std::size_t v = 0; v < r.nodes.size(); ++v) {
    if (r.nodes[v].parent >= 0) {
      ++deg[v];
      ++deg[r.nodes[v].parent];
    }
  }
  // Degenerate when a member sits on a path between two others...
  std::array<int, 4> rid{};
  for (int i = 0; i < 4; ++i) {
    rid[i] = res.old_to_new.at(q[i]);
    if (deg[rid[i]] >= 2) return std::nullopt;
  }
  // ...or when all four meet at one star centre.
  int internal_a = -1, internal_b = -1;
  for (std::size_t v = 0; v < r.nodes.size(); ++v) {
    if (std::find(rid.begin(), rid.end(), static_cast<int>(v)) != rid.end())
      continue;
    if (deg[v] >= 4) return std::nullopt;
    if (internal_a < 0)
      internal_a = static_cast<int>(v);
    else
      internal_b = static_cast<int>(v);
  }
  if (internal_a < 0 || internal_b < 0) return std::nullopt;

  std::vector<int> side_a, side_b;
  for (int i = 0; i < 4; ++i) {
    int att = r.nodes[rid[i]].parent;
    if (rid[i] == r.root) att = r.nodes[rid[i]].children.at(0);
    if (att == internal_a)
      side_a.push_back(q[i]);
    else if (att == internal_b)
      side_b.push_back(q[i]);
  }
  if (side_a.size() != 2 || side_b.size() != 2) return std::nullopt;
  std::sort(side_a.begin(), side_a.end());
  std::sort(side_b.begin(), side_b.end());
  if (side_b[0] < side_a[0]) std::swap(side_a, side_b);
  QuartetSplit out;
  out.side1 = {side_a[0], side_a[1]};
  out.side2 = {side_b[0], side_b[1]};
  out.internal_length = r.nodes[internal_a].parent == internal_b
                            ? r.nodes[internal_a].length
                            : r.nodes[internal_b].length;
  return out;
}

// --- Robinson-Foulds ----------------------------------------------------------

namespace {

std::set<std::vector<std::uint64_t>> bipartitions(const PhyloTree& t) {
  auto leaf_ids = t.leaves();
  int n = static_cast<int>(leaf_ids.size());
  std::unordered_map<int, int> bit;
  for (int i = 0; i < n; ++i) bit[t.nodes[leaf_ids[i]].label] = i;
  int words = (n + 63) / 64;
  std::vector<std::uint64_t> full(words, ~0ull);
  if (n & 63) full.back() = (1ull << (n & 63)) - 1;

  std::vector<std::vector<std::uint64_t>> below(
      t.nodes.size(), std::vector<std::uint64_t>(words, 0));
  std::vector<int> order;
  std::vector<int> stack = {t.root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : t.nodes[v].children) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int v = *it;
    if (t.is_leaf(v)) {
      int b = bit.at(t.nodes[v].label);
      below[v][b >> 6] |= 1ull << (b & 63);
    } else {
      for (int c : t.nodes[v].children)
        for (int w = 0; w < words; ++w) below[v][w] |= below[c][w];
    }
  }

  std::set<std::vector<std::uint64_t>> parts;
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    if (static_cast<int>(v) == t.root) continue;
    int below_count = 0;
    for (int w = 0; w < words; ++w) below_count += std::popcount(below[v][w]);
    if (below_count < 2 || n - below_count < 2) continue;
    std::vector<std::uint64_t> side = below[v];
    if (side[0] & 1) {
      // Canonical side excludes the smallest label (bit 0).
      for (int w = 0; w < words; ++w) side[w] = ~side[w] & full[w];
    }
    parts.insert(std::move(side));
  }
  return parts;
}

}  // namespace

int rf_distance(const PhyloTree& a, const PhyloTree& b) {
  auto la = a.leaves();
  auto lb = b.leaves();
  if (la.size() != lb.size()) fail("rf_distance on different leaf sets");
  for (std::size_t i = 0; i < la.size(); ++i)
    if (a.nodes[la[i]].label != b.nodes[lb[i]].label)
      fail("rf_distance on different leaf sets");
  auto pa = bipartitions(a);
  auto pb = bipartitions(b);
  int common = 0;
  for (const auto& p : pa) common += pb.count(p);
  return static_cast<int>(pa.size()) + static_cast<int>(pb.size()) - 2 * common;
}

}  // namespace bcp
