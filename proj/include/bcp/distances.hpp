#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "bcp/packed_seq.hpp"

namespace bcp {

// Distances are nonnegative reals with an explicit +infinity sentinel (never
// NaN); +infinity flows through the routines below by their stated rules.
using ExtendedDistance = double;

inline ExtendedDistance infinite_distance() {
  return std::numeric_limits<double>::infinity();
}
inline bool is_finite_distance(ExtendedDistance v) {
  return v != infinite_distance();
}

// -0.5 ln of the positive part of the empirical correlation between two
// equal-length +-1 sequences; +infinity when the correlation is <= 0.
ExtendedDistance dist_hat(const PackedSeq& a, const PackedSeq& b);

// Four-point combination 0.5 (D(v1,v2) + D(w1,w2) - D(v1,w1) - D(v2,w2)),
// where (v1,w1) sit on one side and (v2,w2) on the other; the pendant parts
// cancel and the internal separation remains.  +infinity propagates; the
// result may be negative (wrong pairing) and callers interpret it.
ExtendedDistance four_point(ExtendedDistance v1v2, ExtendedDistance w1w2,
                            ExtendedDistance v1w1, ExtendedDistance v2w2);

// four_point over the empirical sequence correlations.
ExtendedDistance int_hat(const PackedSeq& sv1, const PackedSeq& sw1,
                         const PackedSeq& sv2, const PackedSeq& sw2);

// Where pairwise distance estimates come from.  The statistical source runs
// dist_hat over reconstructed sequences; the perfect source serves true path
// distances.  Implementations must be symmetric with zero diagonal.
class PairDistanceSource {
 public:
  virtual ~PairDistanceSource() = default;
  virtual ExtendedDistance pair_distance(int a, int b) = 0;
  // The two children of u in the forest, or {u, u} when u is a leaf.
  virtual std::array<int, 2> reps(int u) = 0;
};

// Distance between u1 and u2 through their children's sequences: if any of
// the six pairwise distances among {v1, w1, v2, w2} exceeds r_acc, returns
// +infinity (accuracy cutoff); otherwise the four-point combination.
ExtendedDistance distance_estimate(int u1, int u2, PairDistanceSource& src,
                                   double r_acc);

struct ShortVerdict {
  bool is_short = false;
  double length = 0.0;  // the estimate when short, else 0
};

// Tests whether the internal path between two explicit node pairs is short:
// accuracy cutoff as in distance_estimate, then nu = four-point; returns
// (true, nu) iff nu < g + tol, else (false, 0).  When round_delta > 0, nu is
// rounded to that grid before the test.
ShortVerdict is_short(const std::array<int, 2>& pair1,
                      const std::array<int, 2>& pair2, PairDistanceSource& src,
                      double r_acc, double g, double tol,
                      double round_delta = 0.0);

// Edge length estimates h(x, child); callers never ask for (x, x).
using EdgeLengthFn = std::function<double(int, int)>;

// The multiple test: for the four child pairs (r1, r2) of x1, x2 compute
// D'(r1,r2) = distance_estimate(r1,r2) - h(x1,r1) - h(x2,r2); if any is
// +infinity or the spread is not < eps/2, returns +infinity, else D'(z1,z2)
// (the second-child pair).  When round_delta > 0 each D' is rounded to the
// grid before the spread test, so the test compares grid points.  m_cap is
// the distance bound M: the accuracy guarantee only covers pairs closer than
// M, and no required decision consults a longer span, so finite values above
// the cap are reported as +infinity rather than trusted.
ExtendedDistance distorted_metric(int x1, int x2, PairDistanceSource& src,
                                  const EdgeLengthFn& h, double r_acc,
                                  double eps, double round_delta = 0.0,
                                  double m_cap = infinite_distance());

// Nearest multiple of delta, halves rounding up; +infinity maps to itself.
ExtendedDistance round_to_delta(ExtendedDistance v, double delta);

// Symmetric (node, node) -> distance map with zero diagonal.
class DistanceTable {
 public:
  void set(int a, int b, ExtendedDistance v);
  ExtendedDistance at(int a, int b) const;  // throws on a missing entry
  bool contains(int a, int b) const;
  void erase_node(int a);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

  // Debug rendering: one row per node, "inf" for the sentinel.
  std::string to_text(const std::vector<int>& nodes) const;

 private:
  static std::uint64_t key(int a, int b);
  std::unordered_map<std::uint64_t, double> entries_;
};

}  // namespace bcp
