#pragma once

#include <array>
#include <functional>

#include "bcp/distances.hpp"

namespace bcp {

// Both tests are pure functions of the distance table; they never trigger
// sequence reconstruction.  Repeated nodes are rejected as errors.

// Does the evidence support the split (v1,w1) | (v2,w2)?  Computes
// nu = 0.5 (D(w1,w2) + D(v1,v2) - D(w1,v1) - D(w2,v2)) and returns false iff
// nu < f/2.  Any +infinity entry forces nu = +infinity, hence true: missing
// evidence never vetoes a split.
bool is_split(const std::array<int, 2>& pair1, const std::array<int, 2>& pair2,
              const DistanceTable& d, double f);

struct CollisionVerdict {
  bool collides = false;
  int u = -1;                   // the tested edge (u, v)
  int v = -1;
  ExtendedDistance nu = 0.0;    // internal length of the probe quartet
};

// The two children of a node in the forest ({u, u} when u is a leaf).
using RepsFn = std::function<std::array<int, 2>(int)>;

// Does the subtree holding x0 attach strictly inside the edge (u, v)?  With
// v1, v2 the children of v, w the sister of v, and h_uv the edge-length
// estimate, computes nu = 0.5 (D(v1,x0) + D(v2,w) - D(v1,v2) - D(x0,w)) (the
// distance from v to where x0's path meets, capped at u) and reports a
// collision iff h_uv - nu > f/2.  Any +infinity gives nu = +infinity and a
// false verdict: collisions are only declared on positive evidence.
CollisionVerdict is_collision(int x0, int v, int w, int u, double h_uv,
                              const RepsFn& reps, const DistanceTable& d,
                              double f);

}  // namespace bcp
