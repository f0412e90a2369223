#include "bcp/quartets.hpp"

#include <stdexcept>

namespace bcp {

namespace {

void require_distinct(const std::array<int, 4>& nodes) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (nodes[i] == nodes[j])
        throw std::runtime_error("degenerate quartet: repeated node");
}

}  // namespace

bool is_split(const std::array<int, 2>& pair1, const std::array<int, 2>& pair2,
              const DistanceTable& d, double f) {
  int v1 = pair1[0], w1 = pair1[1], v2 = pair2[0], w2 = pair2[1];
  require_distinct({v1, w1, v2, w2});
  ExtendedDistance nu = four_point(d.at(w1, w2), d.at(v1, v2), d.at(w1, v1),
                                   d.at(w2, v2));
  if (!is_finite_distance(nu)) return true;
  return !(nu < f / 2.0);
}

CollisionVerdict is_collision(int x0, int v, int w, int u, double h_uv,
                              const RepsFn& reps, const DistanceTable& d,
                              double f) {
  std::array<int, 2> kids = reps(v);
  int v1 = kids[0], v2 = kids[1];  // v1 = v2 = v when v is a leaf
  CollisionVerdict out;
  out.u = u;
  out.v = v;
  out.nu = four_point(d.at(v1, x0), d.at(v2, w), d.at(v1, v2), d.at(x0, w));
  if (!is_finite_distance(out.nu)) {
    out.collides = false;
    return out;
  }
  out.collides = h_uv - out.nu > f / 2.0;
  return out;
}

}  // namespace bcp
