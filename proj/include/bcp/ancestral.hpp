#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bcp/packed_seq.hpp"
#include "bcp/tree.hpp"

namespace bcp {

// Majority with a fair tie-break: sign(sum(values) + 0.5 * omega).  The
// caller supplies omega = +1/-1 (drawn from its own stream); omega only
// matters when the values tie.
int maj_hat(const std::vector<int>& values, int omega);

// --- Recursive majority over a rooted subtree ---------------------------------
//
// The estimator pads the subtree to a complete binary tree whose level count
// is the least multiple of `levels`, using perfectly-correlated edges, then
// takes majorities `levels` at a time.  Padding below a leaf copies the leaf's
// value, so instead of materializing it we give the leaf an integer
// multiplicity in its enclosing majority: a leaf sitting r levels above the
// block floor counts 2^r times.  Ties can then only happen at real nodes.

using ChildrenFn = std::function<const std::vector<int>&(int)>;
using ThetaFn = std::function<double(int)>;        // edge above node -> theta
using LeafRowFn = std::function<const PackedSeq&(int)>;

struct AncPlanEntry {
  int slot;                // value slot: block slot or ~leaf_index when a leaf
  std::int64_t mult;       // completed-copy multiplicity, sums to 2^levels
};

struct AncBlock {
  int node;                        // real node id (keys the tie-break stream)
  std::vector<AncPlanEntry> entries;
};

struct AncPlan {
  int root = -1;
  bool root_is_leaf = false;
  int levels = 0;
  std::vector<int> leaf_nodes;     // subtree leaves, indexed by leaf slot
  std::vector<AncBlock> blocks;    // root block first; entries reference only
                                   // later blocks, so evaluate back to front
};

// Walk the subtree under `root` and lay out one majority block per real node
// whose depth is a multiple of `levels`.
AncPlan build_anc_plan(int root, const ChildrenFn& children, int levels);

// Per-site recursive majority over k-site leaf rows.  Tie bits come from a
// stream keyed by (tie_seed, plan root, block node, site), so identical
// inputs give identical output regardless of chunking.
PackedSeq anc_estimate_planned(const AncPlan& plan, const LeafRowFn& leaf_row,
                               std::int64_t k, std::uint64_t tie_seed,
                               int threads = 1);

// Convenience wrapper over a PhyloTree subtree: leaf values looked up by node.
PackedSeq anc_estimate(const PhyloTree& t, int root, const LeafRowFn& leaf_row,
                       std::int64_t k, int levels, std::uint64_t tie_seed,
                       int threads = 1);

// Exact channel correlation E[estimate | true state at root = +1] of the
// recursive-majority estimator on this subtree, where theta_of gives each
// edge's correlation.  Computed by exact dynamic programming over the real
// subtree (sources sharing a path segment inside a block are dependent, and
// the DP accounts for that).  The channel is symmetric in the state sign.
double anc_channel_correlation(int root, const ChildrenFn& children,
                               const ThetaFn& theta_of, int levels);

// --- Certification of the level parameter --------------------------------------

// Exact E[majority | root = +1] for one majority application on the complete
// binary tree with `levels` levels, uniform edge correlation theta, and leaf
// noise eta (leaf-adjacent edges carry theta * eta).  Dynamic program over
// the distribution of the number of +1 leaves.
double exact_maj_correlation(int levels, double theta, double eta);

// Brute force over all leaf configurations (levels <= 4): oracle for the DP.
double bruteforce_maj_correlation(int levels, double theta, double eta);

struct MajorityConfig {
  int levels = 0;     // majority block height
  double beta = 0.0;  // certified root-correlation floor
  double alpha = 0.0; // small-noise amplification factor (diagnostic)
  double theta_min = 0.0;
};

// Smallest level count whose majority map sends every leaf-noise level up to
// beta back above itself at edge correlation theta_min; beta is the largest
// such sustained point.  Throws NoAmplification when no level count up to
// max_levels works (theta_min too close to the threshold).
MajorityConfig choose_level_parameter(double theta_min, int max_levels = 14);

}  // namespace bcp
