#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcp/ancestral.hpp"

namespace bcp {

// One certified inequality: `lhs REL rhs` with its relative margin
// ((rhs-lhs)/rhs for "<", (lhs-rhs)/rhs for ">"), positive when satisfied.
struct CertLine {
  std::string name;
  std::string relation;  // rendered as "lhs < rhs" or "lhs > rhs"
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

// Every constant the reconstruction needs, bundled with the certificate that
// the operating regime satisfies the required inequalities:
//   eps  < min(f, g'-g)/8        (tolerance)
//   R_col > 6g                   (collision radius)
//   M    > R_col + 4g'           (distance bound)
//   R_acc > M + 2*B_bound + 4g'  (accuracy radius)
//   gamma > 3                    (error exponent)
// plus the regime facts 0 < f <= g < g' < g* (so 2e^{-4g'} > 1).
struct AlgoParams {
  double f = 0.0;
  double g = 0.0;
  double g_prime = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  double r_acc = 0.0;
  double r_col = 0.0;
  double m_bound = 0.0;
  double gamma = 0.0;
  std::int64_t k = 0;
  MajorityConfig majority;
  double b_bound = 0.0;     // worst reconstruction bias: -0.5 ln beta
  double beta_bound = 0.0;  // e^{-2 b_bound}, i.e. the certified beta floor
  std::vector<CertLine> certificate;

  // Re-checks every inequality above; throws InvalidRegime on any failure.
  void validate() const;
};

struct ParamOverrides {
  std::optional<double> g_prime;
  std::optional<double> gamma;
  std::optional<std::int64_t> k;
  std::optional<int> max_levels;  // cap for the majority level search
};

// Builds AlgoParams for the grid regime (f, g, delta) at problem size n and
// failure budget delta_fail.  Strict inequalities are realized with relative
// slack 1e-6 so the certificate margins are unambiguous.  g' defaults to the
// midpoint of (g, g*).  k defaults to calibrated_k.  Throws InvalidRegime on
// a bad regime; NoAmplification from the level search propagates.
AlgoParams derive_params(double f, double g, double delta, int n,
                         double delta_fail, const ParamOverrides& o = {});

// Sequence length actually used at problem size n: C_cal (ln n + ln 1/delta)
// / min(delta^2, f^2).  C_cal is frozen from the n = 32 calibration run of
// the experiment harness (see tools), not claimed as the theorem's constant.
std::int64_t calibrated_k(double f, double delta, int n, double delta_fail);

// The theorem-shaped bound C (ln n + ln 1/delta) / min(delta^2, f^2) for a
// configurable C: a shape for scaling studies, not a certified constant.
std::int64_t theoretical_k(const AlgoParams& p, int n, double delta_fail,
                           double big_c = 1.0);

// Human-readable certificate, one inequality per line with margins.
std::string format_certificate(const AlgoParams& p);

}  // namespace bcp
