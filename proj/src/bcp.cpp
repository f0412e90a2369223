#include "bcp/bcp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "bcp/ancestral.hpp"
#include "bcp/audit.hpp"
#include "bcp/errors.hpp"
#include "bcp/quartets.hpp"

namespace bcp {

std::string cherry_rejection_name(CherryRejection r) {
  switch (r) {
    case CherryRejection::kNone:
      return "none";
    case CherryRejection::kShortDistance:
      return "short-distance";
    case CherryRejection::kNeighborhood:
      return "neighborhood";
    case CherryRejection::kSplit:
      return "split";
    case CherryRejection::kEdgeLengths:
      return "edge-lengths";
  }
  return "unknown";
}

namespace {

const std::vector<int> kNoChildren{};

double quartet_diameter(const DistanceTable& D, int v1, int w1, int v2,
                        int w2) {
  std::array<int, 4> q = {v1, w1, v2, w2};
  double widest = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      widest = std::max(widest, static_cast<double>(D.at(q[i], q[j])));
  return widest;
}

// Closest other root to `anchor` under D; ties and the all-infinite case fall
// to the smallest id (`others` is sorted).
int closest_root(int anchor, const std::vector<int>& others,
                 const DistanceTable& D) {
  int best = others.front();
  ExtendedDistance best_d = D.at(anchor, best);
  for (std::size_t i = 1; i < others.size(); ++i) {
    ExtendedDistance d = D.at(anchor, others[i]);
    if (d < best_d) {
      best = others[i];
      best_d = d;
    }
  }
  return best;
}

}  // namespace

CherryCandidate local_cherry(int v1, int w1, const std::vector<int>& roots,
                             const Forest& f, const DistanceTable& D,
                             ForestMetricSource& src, const AlgoParams& params,
                             double round_delta) {
  CherryCandidate out;
  out.v1 = v1;
  out.w1 = w1;

  // [Short Distance] a cherry's endpoints sit within two pendant edges.
  if (!(D.at(v1, w1) <= 2.0 * params.g + params.eps)) {
    out.rejected_by = CherryRejection::kShortDistance;
    return out;
  }

  // [Local Cherry] every witness pair in the 5g-neighborhood must vote for
  // the split v1 w1 | v2 w2.
  std::vector<int> others;
  others.reserve(roots.size());
  for (int r : roots)
    if (r != v1 && r != w1) others.push_back(r);
  bool witnessed = false;
  for (std::size_t i = 0; i < others.size(); ++i)
    for (std::size_t j = i + 1; j < others.size(); ++j) {
      if (!(quartet_diameter(D, v1, w1, others[i], others[j]) <=
            5.0 * params.g + params.eps))
        continue;
      witnessed = true;
      if (!is_split({v1, w1}, {others[i], others[j]}, D, params.f)) {
        out.rejected_by = CherryRejection::kSplit;
        return out;
      }
    }
  if (!witnessed) {
    out.rejected_by = CherryRejection::kNeighborhood;
    return out;
  }

  // [Edge Lengths] measure each pendant against the nearest outside root.
  out.z0_v = closest_root(v1, others, D);
  ShortVerdict sv = is_short(f.reps(v1), {w1, out.z0_v}, src, params.r_acc,
                             params.g, params.eps / 16.0, round_delta);
  out.z0_w = closest_root(w1, others, D);
  ShortVerdict sw = is_short(f.reps(w1), {v1, out.z0_w}, src, params.r_acc,
                             params.g, params.eps / 16.0, round_delta);
  if (!sv.is_short || !sw.is_short) {
    out.rejected_by = CherryRejection::kEdgeLengths;
    return out;
  }
  out.accepted = true;
  out.l_v = sv.length;
  out.l_w = sw.length;
  return out;
}

std::pair<bool, int> detect_collision(int u0, int u1, const Forest& f,
                                      const DistanceTable& D,
                                      const AlgoParams& params) {
  std::array<int, 2> anchors = f.reps(u0);
  RepsFn reps = [&f](int u) { return f.reps(u); };
  std::vector<int> order = f.tree_nodes_bfs(u1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int v = *it;
    if (v == u1) continue;
    int w = f.sister(v);
    int u = f.parent(v);
    CollisionVerdict bx =
        is_collision(anchors[0], v, w, u, f.h_up(v), reps, D, params.f);
    if (!bx.collides) continue;
    CollisionVerdict by =
        is_collision(anchors[1], v, w, u, f.h_up(v), reps, D, params.f);
    if (by.collides) return {true, v};
  }
  return {false, -1};
}

void update_metric(const Forest& f, ForestMetricSource& src,
                   const AlgoParams& params, double round_delta,
                   DistanceTable& D) {
  D.clear();
  std::vector<std::vector<int>> trees;
  for (int r : f.roots()) trees.push_back(f.tree_nodes_bfs(r));
  EdgeLengthFn h = [&f](int, int child) { return f.h_up(child); };
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& members = trees[t];
    // Within a tree, non-ancestor pairs get summed edge estimates (each edge
    // is accurate to eps/16); ancestor pairs stay undefined.
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        int a = members[i], b = members[j];
        if (f.is_ancestor_or_self(a, b) || f.is_ancestor_or_self(b, a))
          continue;
        D.set(a, b, f.h_path(a, b));
      }
    // Across trees, every node pair gets the distorted metric.
    for (std::size_t s = t + 1; s < trees.size(); ++s)
      for (int a : members)
        for (int b : trees[s])
          D.set(a, b, distorted_metric(a, b, src, h, params.r_acc, params.eps,
                                       round_delta));
  }
}

namespace {

// Estimates from reconstructed sequences: leaves carry their character rows;
// each new cherry root gets a recursive-majority reconstruction over its
// subtree, reading the cached rows `levels` below.
class StatisticalSource final : public ForestMetricSource {
 public:
  StatisticalSource(const CharacterMatrix& chars, const Forest& f,
                    const AlgoParams& params, std::uint64_t seed, int threads)
      : forest_(&f),
        params_(&params),
        seed_(seed),
        threads_(threads),
        k_(chars.k) {
    seq_.resize(static_cast<std::size_t>(f.slot_count()));
    for (int i = 0; i < f.leaf_count(); ++i)
      seq_[static_cast<std::size_t>(i)] = chars.row_of(f.label(i));
  }

  ExtendedDistance pair_distance(int a, int b) override {
    if (a == b) return 0.0;
    std::uint64_t key =
        (static_cast<std::uint64_t>(std::max(a, b)) << 32) |
        static_cast<std::uint32_t>(std::min(a, b));
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    ExtendedDistance v = dist_hat(seq_[static_cast<std::size_t>(a)],
                                  seq_[static_cast<std::size_t>(b)]);
    memo_.emplace(key, v);
    return v;
  }

  std::array<int, 2> reps(int u) override { return forest_->reps(u); }

  void on_cherry(int u1) override {
    std::unordered_map<int, std::vector<int>> kids;
    for (int x : forest_->tree_nodes_bfs(u1)) {
      if (forest_->is_leaf(x)) continue;
      const auto& c = forest_->children(x);
      kids.emplace(x, std::vector<int>{c[0], c[1]});
    }
    ChildrenFn children = [&kids](int x) -> const std::vector<int>& {
      auto it = kids.find(x);
      return it == kids.end() ? kNoChildren : it->second;
    };
    AncPlan plan = build_anc_plan(u1, children, params_->majority.levels);
    if (static_cast<int>(seq_.size()) <= u1)
      seq_.resize(static_cast<std::size_t>(u1) + 1);
    seq_[static_cast<std::size_t>(u1)] = anc_estimate_planned(
        plan,
        [this](int node) -> const PackedSeq& {
          return seq_[static_cast<std::size_t>(node)];
        },
        k_, seed_, threads_);
  }

  std::string mode_name() const override { return "statistical"; }

 private:
  const Forest* forest_;
  const AlgoParams* params_;
  std::uint64_t seed_;
  int threads_;
  std::int64_t k_;
  std::vector<PackedSeq> seq_;
  std::unordered_map<std::uint64_t, ExtendedDistance> memo_;
};

// True path distances between the reference positions of forest nodes.
class PerfectSource final : public ForestMetricSource {
 public:
  PerfectSource(const Forest& f, const Auditor& auditor)
      : forest_(&f), auditor_(&auditor) {}

  ExtendedDistance pair_distance(int a, int b) override {
    return auditor_->oracle().dist(auditor_->pos(a), auditor_->pos(b));
  }
  std::array<int, 2> reps(int u) override { return forest_->reps(u); }
  void on_cherry(int) override {}
  std::string mode_name() const override { return "perfect"; }

 private:
  const Forest* forest_;
  const Auditor* auditor_;
};

class Runner {
 public:
  Runner(Forest& f, ForestMetricSource& src, const AlgoParams& params,
         const BcpOptions& opts, Auditor* auditor)
      : f_(f), src_(src), params_(params), opts_(opts), auditor_(auditor) {}

  BcpResult run() {
    const int n = f_.leaf_count();
    const double rd = opts_.delta_mode ? params_.delta : 0.0;
    if (auditor_) {
      auditor_->init_leaf_positions(f_);
      auditor_->check_fixed_progress(f_, 0, true);  // record the baseline
    }
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        ExtendedDistance est = distance_estimate(u, v, src_, params_.r_acc);
        if (rd > 0.0) est = round_to_delta(est, rd);
        D_.set(u, v, est);
      }

    BcpResult result;
    const int cap = 2 * n;
    for (int iter = 0;; ++iter) {
      if (iter >= cap)
        throw NonConvergence("no convergence after " + std::to_string(cap) +
                             " iterations with " +
                             std::to_string(f_.root_count()) + " roots left");
      IterationRecord rec;
      rec.iteration = iter;
      run_cherry_phase(rec, rd);
      update_metric(f_, src_, params_, rd, D_);
      run_collision_phase(rec, 1, iter);
      run_collision_phase(rec, 2, iter);
      rec.roots_after = f_.root_count();
      bool final_iter = f_.root_count() <= 3;
      if (auditor_) {
        auditor_->check_invariants(f_, iter);
        auditor_->check_fixed_progress(f_, iter, final_iter);
        rec.fixed_nodes = auditor_->last_fixed_count();
      }
      bool progressed = !rec.cherries.empty() || !rec.removals.empty();
      if (opts_.on_iteration) opts_.on_iteration(rec);
      result.trace.push_back(std::move(rec));
      if (final_iter) {
        result.iterations = iter + 1;
        result.tree = join();
        return result;
      }
      if (!progressed)
        throw NonConvergence(
            "iteration " + std::to_string(iter) +
            " added no cherry and removed nothing with " +
            std::to_string(f_.root_count()) +
            " roots left; the regime cannot support reconstruction at this "
            "sequence length");
    }
  }

 private:
  Forest& f_;
  ForestMetricSource& src_;
  const AlgoParams& params_;
  const BcpOptions& opts_;
  Auditor* auditor_;
  DistanceTable D_;

  void run_cherry_phase(IterationRecord& rec, double rd) {
    std::vector<int> snapshot(f_.roots().begin(), f_.roots().end());
    std::set<int> consumed;
    for (std::size_t i = 0; i < snapshot.size(); ++i)
      for (std::size_t j = i + 1; j < snapshot.size(); ++j) {
        int v1 = snapshot[i], w1 = snapshot[j];
        if (consumed.count(v1) || consumed.count(w1)) continue;
        CherryCandidate cand =
            local_cherry(v1, w1, snapshot, f_, D_, src_, params_, rd);
        if (!cand.accepted) continue;
        int u1 = f_.add_cherry(v1, w1, cand.l_v, cand.l_w);
        if (auditor_) auditor_->note_cherry(u1, v1, w1, cand.z0_v);
        src_.on_cherry(u1);
        consumed.insert(v1);
        consumed.insert(w1);
        rec.cherries.push_back({v1, w1, u1, cand.l_v, cand.l_w});
      }
  }

  void run_collision_phase(IterationRecord& rec, int pass, int iter) {
    std::vector<int> snapshot(f_.roots().begin(), f_.roots().end());
    for (int u0 : snapshot)
      for (int u1 : snapshot) {
        if (u0 == u1) continue;
        if (!f_.alive(u0) || !f_.alive(u1)) continue;  // removed this pass
        if (f_.is_leaf(u1)) continue;
        auto [hit, z] = detect_collision(u0, u1, f_, D_, params_);
        if (!hit) continue;
        if (auditor_) auditor_->check_genuine_collision(f_, u0, u1, z, iter);
        std::vector<int> removed = f_.remove_collision(z);
        for (int dead : removed) D_.erase_node(dead);
        rec.removals.push_back({pass, u0, u1, z, std::move(removed)});
      }
  }

  int emit(int fnode, int parent_id, double length, PhyloTree& out) const {
    int id = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    out.nodes[static_cast<std::size_t>(id)].parent = parent_id;
    out.nodes[static_cast<std::size_t>(id)].length = length;
    out.nodes[static_cast<std::size_t>(id)].label =
        f_.is_leaf(fnode) ? f_.label(fnode) : 0;
    if (!f_.is_leaf(fnode)) {
      for (int c : f_.children(fnode)) {
        int cid = emit(c, id, f_.h_up(c), out);
        out.nodes[static_cast<std::size_t>(id)].children.push_back(cid);
      }
    }
    return id;
  }

  PhyloTree join() const {
    std::vector<int> roots(f_.roots().begin(), f_.roots().end());
    // Lengths synthesised here come from half-sums of table entries, so they
    // can drift off the working grid; snap them back in grid mode.
    const double rd = opts_.delta_mode ? params_.delta : 0.0;
    auto snap = [rd](double v) {
      return rd > 0.0 ? round_to_delta(v, rd) : v;
    };
    PhyloTree out;
    out.rooted = false;
    if (roots.size() == 1) {
      // A single complete tree: dissolve the working root so the output is
      // the plain unrooted topology.
      const auto& kids = f_.children(roots[0]);
      int top_child = !f_.is_leaf(kids[0]) ? kids[0] : kids[1];
      int other = top_child == kids[0] ? kids[1] : kids[0];
      int top = emit(top_child, -1, 0.0, out);
      int oth =
          emit(other, top, snap(f_.h_up(kids[0]) + f_.h_up(kids[1])), out);
      out.nodes[static_cast<std::size_t>(top)].children.push_back(oth);
      out.root = top;
    } else if (roots.size() == 2) {
      int r1 = roots[0], r2 = roots[1];
      ExtendedDistance d = D_.at(r1, r2);
      double len = is_finite_distance(d) ? snap(std::max(0.0, double(d))) : 0.0;
      if (f_.is_leaf(r1) && f_.is_leaf(r2)) {
        // Two leaves total: a midpoint top with the span on the first arm.
        out.nodes.resize(1);
        out.root = 0;
        int a = emit(r1, 0, len, out);
        int b = emit(r2, 0, 0.0, out);
        out.nodes[0].children = {a, b};
      } else {
        int top_forest = !f_.is_leaf(r1) ? r1 : r2;
        int other = top_forest == r1 ? r2 : r1;
        int top = emit(top_forest, -1, 0.0, out);
        int oth = emit(other, top, len, out);
        out.nodes[static_cast<std::size_t>(top)].children.push_back(oth);
        out.root = top;
      }
    } else {
      int a = roots[0], b = roots[1], c = roots[2];
      auto pendant = [&](int i, int j, int k) {
        ExtendedDistance dij = D_.at(i, j), dik = D_.at(i, k),
                         djk = D_.at(j, k);
        if (!is_finite_distance(dij) || !is_finite_distance(dik) ||
            !is_finite_distance(djk))
          return 0.0;
        return snap(std::max(0.0, 0.5 * (dij + dik - djk)));
      };
      out.nodes.resize(1);
      out.root = 0;
      int na = emit(a, 0, pendant(a, b, c), out);
      int nb = emit(b, 0, pendant(b, a, c), out);
      int nc = emit(c, 0, pendant(c, a, b), out);
      out.nodes[0].children = {na, nb, nc};
    }
    out.check_valid();
    return out;
  }
};

}  // namespace

BcpResult bcp_run(const CharacterMatrix& chars, const AlgoParams& params,
                  const BcpOptions& opts) {
  if (chars.alphabet != Alphabet::kCfn)
    throw InvalidRegime(
        "four-state characters not supported here: collapse them to binary "
        "classes, derive parameters for the doubled regime, and halve the "
        "output lengths");
  params.validate();
  if (chars.leaf_order.size() < 2)
    throw std::invalid_argument("need at least two leaves");
  Forest f(chars.leaf_order);
  std::unique_ptr<Auditor> auditor;
  if (opts.audit) {
    if (!opts.true_tree)
      throw std::invalid_argument("auditing requires the true tree");
    auditor = std::make_unique<Auditor>(*opts.true_tree, params);
  }
  StatisticalSource src(chars, f, params, opts.seed, opts.threads);
  Runner runner(f, src, params, opts, auditor.get());
  return runner.run();
}

BcpResult bcp_run_perfect(const PhyloTree& true_tree, const AlgoParams& params,
                          BcpOptions opts) {
  params.validate();
  std::vector<int> labels;
  for (int leaf : true_tree.leaves())
    labels.push_back(true_tree.nodes[static_cast<std::size_t>(leaf)].label);
  if (labels.size() < 2)
    throw std::invalid_argument("need at least two leaves");
  Forest f(labels);
  opts.audit = true;
  opts.true_tree = &true_tree;
  Auditor auditor(true_tree, params);
  PerfectSource src(f, auditor);
  Runner runner(f, src, params, opts, &auditor);
  return runner.run();
}

}  // namespace bcp
