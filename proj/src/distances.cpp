#include "bcp/distances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bcp {

ExtendedDistance dist_hat(const PackedSeq& a, const PackedSeq& b) {
  if (a.size() != b.size() || a.size() < 1)
    throw std::runtime_error("sequences must have equal positive length");
  double corr = double(a.corr_sum(b)) / double(a.size());
  if (corr <= 0.0) return infinite_distance();
  return -0.5 * std::log(corr);
}

ExtendedDistance four_point(ExtendedDistance v1v2, ExtendedDistance w1w2,
                            ExtendedDistance v1w1, ExtendedDistance v2w2) {
  if (!is_finite_distance(v1v2) || !is_finite_distance(w1w2) ||
      !is_finite_distance(v1w1) || !is_finite_distance(v2w2))
    return infinite_distance();
  return 0.5 * (v1v2 + w1w2 - v1w1 - v2w2);
}

ExtendedDistance int_hat(const PackedSeq& sv1, const PackedSeq& sw1,
                         const PackedSeq& sv2, const PackedSeq& sw2) {
  return four_point(dist_hat(sv1, sv2), dist_hat(sw1, sw2),
                    dist_hat(sv1, sw1), dist_hat(sv2, sw2));
}

namespace {

// Accuracy cutoff shared by distance_estimate and is_short: any of the six
// pairwise distances above r_acc disqualifies the quartet.
bool fails_cutoff(const std::array<int, 4>& nodes, PairDistanceSource& src,
                  double r_acc) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (src.pair_distance(nodes[i], nodes[j]) > r_acc) return true;
  return false;
}

ExtendedDistance quartet_value(const std::array<int, 4>& nodes,
                               PairDistanceSource& src) {
  // nodes = {v1, w1, v2, w2}; plus-terms cross the split, minus-terms stay
  // within a side.
  return four_point(src.pair_distance(nodes[0], nodes[2]),
                    src.pair_distance(nodes[1], nodes[3]),
                    src.pair_distance(nodes[0], nodes[1]),
                    src.pair_distance(nodes[2], nodes[3]));
}

}  // namespace

ExtendedDistance distance_estimate(int u1, int u2, PairDistanceSource& src,
                                   double r_acc) {
  std::array<int, 2> side1 = src.reps(u1);
  std::array<int, 2> side2 = src.reps(u2);
  std::array<int, 4> nodes = {side1[0], side1[1], side2[0], side2[1]};
  if (fails_cutoff(nodes, src, r_acc)) return infinite_distance();
  return quartet_value(nodes, src);
}

ShortVerdict is_short(const std::array<int, 2>& pair1,
                      const std::array<int, 2>& pair2, PairDistanceSource& src,
                      double r_acc, double g, double tol, double round_delta) {
  std::array<int, 4> nodes = {pair1[0], pair1[1], pair2[0], pair2[1]};
  if (fails_cutoff(nodes, src, r_acc)) return {false, 0.0};
  ExtendedDistance nu = quartet_value(nodes, src);
  if (round_delta > 0.0) nu = round_to_delta(nu, round_delta);
  if (nu < g + tol) return {true, nu};
  return {false, 0.0};
}

ExtendedDistance distorted_metric(int x1, int x2, PairDistanceSource& src,
                                  const EdgeLengthFn& h, double r_acc,
                                  double eps, double round_delta, double m_cap) {
  std::array<int, 2> r1 = src.reps(x1);
  std::array<int, 2> r2 = src.reps(x2);
  double values[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      ExtendedDistance base = distance_estimate(r1[i], r2[j], src, r_acc);
      if (!is_finite_distance(base)) return infinite_distance();
      double lift1 = r1[i] == x1 ? 0.0 : h(x1, r1[i]);
      double lift2 = r2[j] == x2 ? 0.0 : h(x2, r2[j]);
      double value = base - lift1 - lift2;
      if (round_delta > 0.0) value = round_to_delta(value, round_delta);
      values[i][j] = value;
    }
  }
  double lo = values[0][0], hi = values[0][0];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      lo = std::min(lo, values[i][j]);
      hi = std::max(hi, values[i][j]);
    }
  if (!(hi - lo < eps / 2.0)) return infinite_distance();
  return values[1][1];  // the (z1, z2) pair
}

ExtendedDistance round_to_delta(ExtendedDistance v, double delta) {
  if (!(delta > 0.0)) throw std::runtime_error("grid step must be positive");
  if (!is_finite_distance(v)) return infinite_distance();
  return std::floor(v / delta + 0.5) * delta;  // halves round up
}

std::uint64_t DistanceTable::key(int a, int b) {
  std::uint32_t lo = static_cast<std::uint32_t>(std::min(a, b));
  std::uint32_t hi = static_cast<std::uint32_t>(std::max(a, b));
  return (std::uint64_t(hi) << 32) | lo;
}

void DistanceTable::set(int a, int b, ExtendedDistance v) {
  if (a == b) throw std::runtime_error("diagonal entries are fixed at zero");
  entries_[key(a, b)] = v;
}

ExtendedDistance DistanceTable::at(int a, int b) const {
  if (a == b) return 0.0;
  auto it = entries_.find(key(a, b));
  if (it == entries_.end())
    throw std::runtime_error("missing distance entry (" + std::to_string(a) +
                             ", " + std::to_string(b) + ")");
  return it->second;
}

bool DistanceTable::contains(int a, int b) const {
  return a == b || entries_.count(key(a, b)) > 0;
}

void DistanceTable::erase_node(int a) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    int lo = static_cast<int>(it->first & 0xffffffffu);
    int hi = static_cast<int>(it->first >> 32);
    if (lo == a || hi == a)
      it = entries_.erase(it);
    else
      ++it;
  }
}

std::string DistanceTable::to_text(const std::vector<int>& nodes) const {
  std::string out;
  char buf[64];
  for (int a : nodes) {
    std::snprintf(buf, sizeof buf, "%d:", a);
    out += buf;
    for (int b : nodes) {
      if (!contains(a, b)) {
        out += " ?";
      } else if (!is_finite_distance(at(a, b))) {
        out += " inf";
      } else {
        std::snprintf(buf, sizeof buf, " %.17g", at(a, b));
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace bcp
