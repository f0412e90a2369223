#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bcp/distances.hpp"
#include "bcp/forest.hpp"
#include "bcp/model.hpp"
#include "bcp/params.hpp"
#include "bcp/tree.hpp"

namespace bcp {

// Which test turned a candidate root pair down.
enum class CherryRejection {
  kNone,          // accepted
  kShortDistance, // D(v1, w1) beyond 2g + eps
  kNeighborhood,  // no witness pair within 5g + eps
  kSplit,         // a witness quartet voted against the pairing
  kEdgeLengths,   // a pendant-length test failed
};

std::string cherry_rejection_name(CherryRejection r);

struct CherryCandidate {
  int v1 = -1;
  int w1 = -1;
  bool accepted = false;
  CherryRejection rejected_by = CherryRejection::kNone;
  double l_v = 0.0;  // pendant estimate for v1 when accepted
  double l_w = 0.0;
  int z0_v = -1;  // reference root used to measure v1's pendant
  int z0_w = -1;
};

// Metric backends: serve raw pairwise estimates between forest nodes (no
// cutoffs; the estimation routines apply those).  The statistical backend
// compares reconstructed sequences; the perfect backend serves true path
// distances, realizing the run under perfect local information.
class ForestMetricSource : public PairDistanceSource {
 public:
  // Called right after a cherry root enters the forest so the backend can set
  // up per-node state (e.g. reconstruct the root's sequence).
  virtual void on_cherry(int u1) = 0;
  virtual std::string mode_name() const = 0;
};

// --- Main loop pieces (exposed for focused tests) ---------------------------

// The three-test cherry decision for one root pair, evaluated against the
// iteration-start snapshot: `roots` is the full root list of that snapshot
// and D its metric.  The forest is consulted only for children/leaf shape.
CherryCandidate local_cherry(int v1, int w1, const std::vector<int>& roots,
                             const Forest& f, const DistanceTable& D,
                             ForestMetricSource& src, const AlgoParams& params,
                             double round_delta);

// Scans u1's tree deepest-first for an edge that u0's tree provably collides
// into, testing from both of u0's child representatives.  Returns (true, v)
// for the child end of the first such edge, else (false, -1).
std::pair<bool, int> detect_collision(int u0, int u1, const Forest& f,
                                      const DistanceTable& D,
                                      const AlgoParams& params);

// Rebuilds D over the forest: within a tree, non-ancestor pairs get summed
// edge estimates; across trees, every node pair gets the distorted metric
// (rounded to the grid when round_delta > 0).  Ancestor pairs stay absent.
void update_metric(const Forest& f, ForestMetricSource& src,
                   const AlgoParams& params, double round_delta,
                   DistanceTable& D);

// --- Whole runs --------------------------------------------------------------

struct CherryRecord {
  int v1 = -1, w1 = -1, u1 = -1;
  double l_v = 0.0, l_w = 0.0;
};

struct RemovalRecord {
  int pass = 0;  // 1 or 2
  int u0 = -1, u1 = -1, z = -1;
  std::vector<int> removed;
};

struct IterationRecord {
  int iteration = 0;
  std::vector<CherryRecord> cherries;
  std::vector<RemovalRecord> removals;
  int roots_after = 0;
  int fixed_nodes = -1;  // audit runs only; -1 otherwise
};

struct BcpOptions {
  bool delta_mode = true;  // estimates snap to the delta grid
  std::uint64_t seed = 0;  // tie-break seed for sequence reconstruction
  int threads = 1;
  bool audit = false;                  // requires true_tree
  const PhyloTree* true_tree = nullptr;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct BcpResult {
  PhyloTree tree;  // unrooted topology, lengths = working estimates
  int iterations = 0;
  std::vector<IterationRecord> trace;
};

// Reconstructs the topology from binary leaf characters.  Four-state inputs
// must be collapsed into purine/pyrimidine classes first (which doubles all
// distances, so the caller derives params for the doubled regime and halves
// the output lengths).  Throws InvalidRegime for a four-state matrix,
// NonConvergence when an iteration makes no progress or the iteration cap
// (2n) is hit, and AuditViolation when auditing finds a broken invariant.
BcpResult bcp_run(const CharacterMatrix& chars, const AlgoParams& params,
                  const BcpOptions& opts = {});

// The same loop with every estimate served from true path distances; audits
// against the true tree are always on.
BcpResult bcp_run_perfect(const PhyloTree& true_tree, const AlgoParams& params,
                          BcpOptions opts = {});

}  // namespace bcp
