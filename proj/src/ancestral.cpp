#include "bcp/ancestral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

#include "bcp/errors.hpp"
#include "bcp/rng.hpp"
#include "bcp/tree.hpp"

namespace bcp {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

}  // namespace

int maj_hat(const std::vector<int>& values, int omega) {
  if (values.empty()) fail("majority of an empty list");
  long long sum = 0;
  for (int v : values) sum += v;
  if (sum != 0) return sum > 0 ? +1 : -1;
  return omega > 0 ? +1 : -1;
}

// --- Plan construction ----------------------------------------------------------

AncPlan build_anc_plan(int root, const ChildrenFn& children, int levels) {
  if (levels < 1) fail("majority block height must be positive");
  AncPlan plan;
  plan.root = root;
  plan.levels = levels;

  if (children(root).empty()) {
    plan.root_is_leaf = true;
    plan.leaf_nodes.push_back(root);
    return plan;
  }

  std::unordered_map<int, int> leaf_slot;
  auto leaf_ref = [&](int v) {
    auto it = leaf_slot.find(v);
    if (it == leaf_slot.end()) {
      it = leaf_slot.emplace(v, static_cast<int>(plan.leaf_nodes.size())).first;
      plan.leaf_nodes.push_back(v);
    }
    return ~it->second;
  };

  // Blocks are discovered breadth-first, so entries of plan.blocks[i] only
  // reference blocks with index > i (or leaves).  Evaluation runs backwards.
  std::vector<int> pending = {root};
  for (std::size_t head = 0; head < pending.size(); ++head) {
    int b = pending[head];
    if (children(b).size() != 2)
      fail("recursive majority needs a full binary subtree");
    AncBlock block;
    block.node = b;
    // Descend `levels` edges; leaves met on the way join the majority with
    // multiplicity 2^(remaining levels) — the weight of their padding copies.
    std::function<void(int, int)> walk = [&](int v, int steps) {
      const std::vector<int>& kids = children(v);
      if (kids.empty()) {
        block.entries.push_back({leaf_ref(v), std::int64_t(1) << steps});
        return;
      }
      if (kids.size() != 2)
        fail("recursive majority needs a full binary subtree");
      if (steps == 0) {
        pending.push_back(v);
        block.entries.push_back({static_cast<int>(pending.size()) - 1, 1});
        return;
      }
      for (int c : kids) walk(c, steps - 1);
    };
    for (int c : children(b)) walk(c, levels - 1);
    plan.blocks.push_back(std::move(block));
  }
  return plan;
}

// --- Sequence estimation ----------------------------------------------------------

namespace {

void eval_chunk(const AncPlan& plan,
                const std::vector<const PackedSeq*>& rows,
                const std::vector<std::uint64_t>& tie_keys, std::int64_t lo,
                std::int64_t hi, PackedSeq* out) {
  std::vector<int> vals(plan.blocks.size());
  for (std::int64_t site = lo; site < hi; ++site) {
    for (int bi = static_cast<int>(plan.blocks.size()) - 1; bi >= 0; --bi) {
      std::int64_t sum = 0;
      for (const AncPlanEntry& e : plan.blocks[bi].entries) {
        int v = e.slot >= 0 ? vals[e.slot] : rows[~e.slot]->get(site);
        sum += e.mult * v;
      }
      vals[bi] = sum != 0 ? (sum > 0 ? +1 : -1)
                          : sign_bit_at(tie_keys[bi], site);
    }
    if (vals[0] > 0) out->set_plus(site);
  }
}

template <class Fn>
void run_site_chunks(std::int64_t k, int threads, Fn fn) {
  threads = std::max(1, threads);
  std::int64_t words = (k + 63) / 64;
  std::int64_t per = std::max<std::int64_t>(1, (words + threads - 1) / threads);
  if (threads == 1 || words <= per) {
    fn(0, k);
    return;
  }
  std::vector<std::thread> pool;
  for (std::int64_t w = 0; w < words; w += per) {
    std::int64_t lo = w * 64;
    std::int64_t hi = std::min(k, (w + per) * 64);
    pool.emplace_back([=] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

PackedSeq anc_estimate_planned(const AncPlan& plan, const LeafRowFn& leaf_row,
                               std::int64_t k, std::uint64_t tie_seed,
                               int threads) {
  std::vector<const PackedSeq*> rows;
  rows.reserve(plan.leaf_nodes.size());
  for (int v : plan.leaf_nodes) {
    rows.push_back(&leaf_row(v));
    if (rows.back()->size() != k) fail("leaf row has the wrong site count");
  }
  if (plan.root_is_leaf) return *rows[0];

  std::vector<std::uint64_t> tie_keys;
  tie_keys.reserve(plan.blocks.size());
  for (const AncBlock& b : plan.blocks)
    tie_keys.push_back(stream_key({tie_seed, kTagTieBreak,
                                   static_cast<std::uint64_t>(plan.root),
                                   static_cast<std::uint64_t>(b.node)}));
  PackedSeq out(k);
  run_site_chunks(k, threads, [&](std::int64_t lo, std::int64_t hi) {
    eval_chunk(plan, rows, tie_keys, lo, hi, &out);
  });
  return out;
}

PackedSeq anc_estimate(const PhyloTree& t, int root, const LeafRowFn& leaf_row,
                       std::int64_t k, int levels, std::uint64_t tie_seed,
                       int threads) {
  ChildrenFn children = [&t](int v) -> const std::vector<int>& {
    return t.nodes[v].children;
  };
  auto plan = build_anc_plan(root, children, levels);
  return anc_estimate_planned(plan, leaf_row, k, tie_seed, threads);
}

// --- Analytic channel --------------------------------------------------------------

double anc_channel_correlation(int root, const ChildrenFn& children,
                               const ThetaFn& theta_of, int levels) {
  if (levels < 1) fail("majority block height must be positive");
  std::unordered_map<int, double> memo;

  // Mix a child bucket's sum distribution across the edge into the parent:
  // the child copies the parent's state with probability q, else the bucket
  // distribution is mirrored.  Vectors are dense over [-reach, +reach].
  auto mix = [](const std::vector<double>& d, double q) {
    std::size_t m = d.size();
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i)
      out[i] = q * d[i] + (1.0 - q) * d[m - 1 - i];
    return out;
  };
  auto conv = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  };

  std::function<double(int)> block_corr = [&](int b) -> double {
    auto it = memo.find(b);
    if (it != memo.end()) return it->second;
    double c;
    if (children(b).empty()) {
      c = 1.0;  // a leaf reports its own state
    } else {
      // dist_of(v, steps): distribution of the weighted vote sum contributed
      // by v's part of the block, conditional on v's true state being +1.
      std::function<std::vector<double>(int, int)> dist_of =
          [&](int v, int steps) -> std::vector<double> {
        const std::vector<int>& kids = children(v);
        std::int64_t reach = std::int64_t(1) << steps;
        if (kids.empty()) {
          std::vector<double> d(2 * reach + 1, 0.0);
          d[2 * reach] = 1.0;  // all 2^steps padding copies vote with v
          return d;
        }
        if (kids.size() != 2)
          fail("recursive majority needs a full binary subtree");
        if (steps == 0) {
          double cc = block_corr(v);  // a lower block's output channel
          return {(1.0 - cc) / 2.0, 0.0, (1.0 + cc) / 2.0};
        }
        std::vector<double> parts[2];
        for (int s = 0; s < 2; ++s) {
          double q = (1.0 + theta_of(kids[s])) / 2.0;
          parts[s] = mix(dist_of(kids[s], steps - 1), q);
        }
        return conv(parts[0], parts[1]);
      };
      std::vector<double> d = dist_of(b, levels);
      std::int64_t w = std::int64_t(1) << levels;
      double plus = 0.0, minus = 0.0;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.size()); ++i) {
        if (i > w) plus += d[i];
        if (i < w) minus += d[i];
      }
      c = plus - minus;  // ties fall to the fair coin and contribute zero
    }
    memo.emplace(b, c);
    return c;
  };
  return block_corr(root);
}

// --- Exact majority correlation ------------------------------------------------------

double exact_maj_correlation(int levels, double theta, double eta) {
  if (levels < 1) fail("need at least one level");
  if (theta <= 0.0 || theta > 1.0 || eta <= 0.0 || eta > 1.0)
    fail("correlations must lie in (0, 1]");
  // f[i] = P(i of the 2^d leaves are +1 | subtree root is +1), grown from a
  // single leaf by mixing across one edge and convolving two children.
  std::vector<double> f = {0.0, 1.0};
  for (int d = 1; d <= levels; ++d) {
    double edge = (d == 1) ? theta * eta : theta;
    double q = (1.0 + edge) / 2.0;
    std::size_t m = f.size();  // m-1 leaves per child subtree
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i)
      g[i] = q * f[i] + (1.0 - q) * f[m - 1 - i];
    std::vector<double> next(2 * m - 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (g[i] == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) next[i + j] += g[i] * g[j];
    }
    f.swap(next);
  }
  std::int64_t leaves = std::int64_t(1) << levels;
  double plus = 0.0, minus = 0.0;
  for (std::int64_t i = 0; i <= leaves; ++i) {
    if (2 * i > leaves) plus += f[i];
    if (2 * i < leaves) minus += f[i];
  }
  return plus - minus;
}

double bruteforce_maj_correlation(int levels, double theta, double eta) {
  if (levels < 1 || levels > 4) fail("brute force caps at four levels");
  int leaves = 1 << levels;
  // Exact likelihood of each leaf configuration given root +1, by summing
  // over internal states bottom-up (pruning), on the complete binary tree.
  double total = 0.0;
  for (int config = 0; config < (1 << leaves); ++config) {
    // like[node][s]: probability of the assigned leaves below `node` given
    // its state is s (0 = +1, 1 = -1).  Nodes indexed heap-style from 1.
    int node_count = 2 * leaves;
    std::vector<std::array<double, 2>> like(node_count);
    for (int v = node_count - 1; v >= 1; --v) {
      if (v >= leaves) {
        int bit = (config >> (v - leaves)) & 1;  // 0 = +1
        like[v] = {bit == 0 ? 1.0 : 0.0, bit == 0 ? 0.0 : 1.0};
      } else {
        bool child_is_leaf = 2 * v >= leaves;
        double edge = child_is_leaf ? theta * eta : theta;
        double q = (1.0 + edge) / 2.0;
        for (int s = 0; s < 2; ++s) {
          double acc = 1.0;
          for (int c : {2 * v, 2 * v + 1})
            acc *= q * like[c][s] + (1.0 - q) * like[c][1 - s];
          like[v][s] = acc;
        }
      }
    }
    int sum = 0;
    for (int i = 0; i < leaves; ++i) sum += ((config >> i) & 1) ? -1 : +1;
    double vote = sum > 0 ? 1.0 : (sum < 0 ? -1.0 : 0.0);
    total += like[1][0] * vote;
  }
  return total;
}

// --- Level parameter search ---------------------------------------------------------

MajorityConfig choose_level_parameter(double theta_min, int max_levels) {
  if (theta_min <= 0.0 || theta_min > 1.0)
    fail("edge correlation must lie in (0, 1]");
  const double tol = 1e-12;
  for (int levels = 1; levels <= max_levels; ++levels) {
    auto phi = [&](double eta) {
      return exact_maj_correlation(levels, theta_min, eta);
    };
    // Small-noise screen: no amplification near zero means no fixed point.
    double alpha = phi(0.01) / 0.01;
    if (alpha + tol < 1.0) continue;

    // Scan upward for the largest sustained eta with phi(eta) >= eta.
    const double step = 0.005;
    double beta = 0.0;
    for (double eta = step; eta <= 1.0 + 1e-9; eta += step) {
      double e = std::min(eta, 1.0);
      if (phi(e) + tol >= e)
        beta = e;
      else
        break;
    }
    if (beta == 0.0) continue;
    // Refine the boundary within the last passing grid cell.
    double lo = beta, hi = std::min(beta + step, 1.0);
    for (int it = 0; it < 20 && hi - lo > 1e-6; ++it) {
      double mid = (lo + hi) / 2;
      if (phi(mid) + tol >= mid)
        lo = mid;
      else
        hi = mid;
    }
    beta = lo;
    if (phi(beta) + tol < beta) continue;  // paranoia: certify the floor
    return {levels, beta, alpha, theta_min};
  }
  throw NoAmplification(
      "no majority block height up to " + std::to_string(max_levels) +
      " amplifies at edge correlation " + std::to_string(theta_min) +
      "; lower g");
}

}  // namespace bcp
