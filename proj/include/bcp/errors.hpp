#pragma once

#include <stdexcept>
#include <string>

namespace bcp {

// Parameter regime cannot support reconstruction (lengths off-grid, g at or
// above the solvability threshold, malformed bounds).
struct InvalidRegime : std::runtime_error {
  explicit InvalidRegime(const std::string& what) : std::runtime_error(what) {}
};

// No majority level count within the search cap amplifies the root signal at
// the requested edge correlation; the caller must lower g.
struct NoAmplification : std::runtime_error {
  explicit NoAmplification(const std::string& what)
      : std::runtime_error(what) {}
};

// A run-time audit against the true tree found a forest invariant broken.
struct AuditViolation : std::runtime_error {
  explicit AuditViolation(const std::string& what)
      : std::runtime_error(what) {}
};

// The main loop made no progress in an iteration (no cherry added, nothing
// removed) while more than three roots remain.
struct NonConvergence : std::runtime_error {
  explicit NonConvergence(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace bcp
