#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bcp/packed_seq.hpp"
#include "bcp/tree.hpp"

namespace bcp {

// Solvability threshold for the two-state model: edge lengths strictly below
// g_star keep ancestral signal reconstructible at every scale.
inline double g_star() { return 0.17328679513998632; }  // ln(2)/4
// Four-state sequences hit the same threshold at half the length.
inline double g_star_jc() { return g_star() / 2.0; }

enum class Alphabet { kCfn, kJc };

// Symmetric two-state (+1/-1) or four-state (ACGT) substitution model with a
// uniform root prior.  Edge transition matrices are exp(d * Q) with the
// all-rates-equal generator; the closed forms live in p_of_d.
struct ModelSpec {
  Alphabet kind = Alphabet::kCfn;

  static ModelSpec cfn() { return {Alphabet::kCfn}; }
  static ModelSpec jc() { return {Alphabet::kJc}; }

  int state_count() const { return kind == Alphabet::kCfn ? 2 : 4; }
  double root_prior() const { return 1.0 / state_count(); }
};

// Pairwise state correlation across one edge of length d: e^{-2d}.
double theta_of_d(double d);

// Per-transition flip probability across one edge of length d.
// Two states: (1 - e^{-2d}) / 2.  Four states: (1 - e^{-4d}) / 4 towards each
// of the three other states.
double p_of_d(const ModelSpec& model, double d);

// Closed-form single-edge transition matrix, row = from, column = to.
std::vector<std::vector<double>> transition_matrix(const ModelSpec& model,
                                                   double d);

// Random-tree family: uniform labelled binary topologies whose edge lengths
// sit on the grid {f, f+delta, ..., g}.
struct DeltaBMSpec {
  int n = 0;         // leaf count, labels 1..n
  double f = 0.0;    // shortest edge
  double g = 0.0;    // longest edge
  double delta = 0;  // grid step

  void validate() const;  // throws std::runtime_error on a bad regime
  std::vector<double> length_grid() const;
};

PhyloTree random_delta_bm_tree(const DeltaBMSpec& spec, std::uint64_t seed);

// Leaf data: k sites per leaf, rows parallel to leaf_order (ascending labels).
// Two-state rows are bit-packed; four-state rows hold 0..3 = A,C,G,T.
struct CharacterMatrix {
  Alphabet alphabet = Alphabet::kCfn;
  std::int64_t k = 0;
  std::vector<int> leaf_order;
  std::vector<PackedSeq> cfn_rows;
  std::vector<std::vector<std::uint8_t>> jc_rows;

  const PackedSeq& row_of(int label) const;
};

// Draw k i.i.d. characters down the tree.  Every random decision is keyed by
// (seed, edge, site), so the output is one fixed function of the arguments no
// matter how the work is chunked; `threads` only changes wall time.
CharacterMatrix simulate(const PhyloTree& t, const ModelSpec& model,
                         std::int64_t k, std::uint64_t seed, int threads = 1);

// Same draw, but keeping every node's states (two-state models only); used by
// oracles that compare reconstructed ancestral states against the truth.
struct FullSimulation {
  CharacterMatrix leaves;
  std::vector<PackedSeq> node_states;  // indexed by node id
};
FullSimulation simulate_full(const PhyloTree& t, const ModelSpec& model,
                             std::int64_t k, std::uint64_t seed,
                             int threads = 1);

// Collapse four-state data onto purine/pyrimidine classes: A,G -> +1 and
// C,T -> -1.  The induced two-state process is exact with every length
// doubled, so downstream distance estimates must be halved for four-state
// inputs.
CharacterMatrix jc_to_cfn_reduce(const CharacterMatrix& m);

// Line-oriented text format: "k=<int> alphabet=<CFN|JC>" header, then
// "<label>\t<sequence>" per leaf ("+-" or "ACGT" characters).
std::string write_character_matrix(const CharacterMatrix& m);
CharacterMatrix read_character_matrix(std::string_view text);
void write_character_matrix_file(const std::string& path,
                                 const CharacterMatrix& m);
CharacterMatrix read_character_matrix_file(const std::string& path);

// Exact E[sigma_u sigma_v] by summing the two-state measure over all node
// configurations; an oracle for small trees (caps at 24 nodes).
double enumerated_pair_correlation(const PhyloTree& t, int u, int v);

}  // namespace bcp
