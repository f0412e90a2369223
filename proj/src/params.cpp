#include "bcp/params.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "bcp/errors.hpp"
#include "bcp/model.hpp"

namespace bcp {

namespace {

constexpr double kSlack = 1e-6;

// Frozen from the n = 32 calibration run of the experiment harness (see the
// calibrate subcommand): smallest C whose k gave >= 90% reconstruction
// success over 50 trials, rounded up one calibration step for headroom.
constexpr double kCalibratedC = 3.0;

bool on_grid(double x, double delta) {
  double ratio = x / delta;
  return std::abs(ratio - std::round(ratio)) <= 1e-6 * std::max(1.0, ratio);
}

CertLine make_line(const std::string& name, double lhs,
                   const std::string& relation, double rhs) {
  double margin = relation == "<" ? (rhs - lhs) / rhs : (lhs - rhs) / rhs;
  return {name, relation, lhs, rhs, margin};
}

std::vector<CertLine> build_certificate(const AlgoParams& p) {
  std::vector<CertLine> cert;
  cert.push_back(make_line("edge upper bound: g' < g*", p.g_prime, "<",
                           g_star()));
  cert.push_back(make_line("tolerance: eps < min(f, g'-g)/8", p.eps, "<",
                           std::min(p.f, p.g_prime - p.g) / 8.0));
  cert.push_back(make_line("collision radius: R_col > 6g", p.r_col, ">",
                           6.0 * p.g));
  cert.push_back(make_line("distance bound: M > R_col + 4g'", p.m_bound, ">",
                           p.r_col + 4.0 * p.g_prime));
  cert.push_back(make_line("accuracy radius: R_acc > M + 2B + 4g'", p.r_acc,
                           ">", p.m_bound + 2.0 * p.b_bound + 4.0 * p.g_prime));
  cert.push_back(make_line("error exponent: gamma > 3", p.gamma, ">", 3.0));
  return cert;
}

}  // namespace

void AlgoParams::validate() const {
  if (!(f > 0.0) || !(f <= g))
    throw InvalidRegime("edge lengths need 0 < f <= g");
  if (!(g < g_prime))
    throw InvalidRegime("g' must exceed g");
  if (!(delta > 0.0) || !on_grid(f, delta) || !on_grid(g, delta))
    throw InvalidRegime("f and g must be positive multiples of delta");
  if (k < 1) throw InvalidRegime("sequence length must be positive");
  if (!(majority.beta > 0.0) || majority.levels < 1)
    throw InvalidRegime("majority operating point is missing");
  if (std::abs(b_bound + 0.5 * std::log(majority.beta)) > 1e-12 ||
      std::abs(beta_bound - std::exp(-2.0 * b_bound)) > 1e-12)
    throw InvalidRegime("bias bound is inconsistent with beta");
  for (const CertLine& line : build_certificate(*this))
    if (!(line.margin > 0.0))
      throw InvalidRegime("parameter inequality violated: " + line.name);
}

AlgoParams derive_params(double f, double g, double delta, int n,
                         double delta_fail, const ParamOverrides& o) {
  if (!(f > 0.0) || !(f <= g))
    throw InvalidRegime("edge lengths need 0 < f <= g");
  if (!(g < g_star()))
    throw InvalidRegime(
        "g must stay below g* = ln(2)/4 ~ 0.173287; reconstruction from "
        "short sequences is not solvable past it");
  if (!(delta > 0.0))
    throw InvalidRegime("grid step delta must be positive");
  if (!on_grid(f, delta) || !on_grid(g, delta))
    throw InvalidRegime("f and g must be multiples of delta");
  if (n < 2) throw InvalidRegime("need at least two leaves");
  if (!(delta_fail > 0.0) || !(delta_fail < 1.0))
    throw InvalidRegime("failure budget must lie in (0, 1)");

  AlgoParams p;
  p.f = f;
  p.g = g;
  p.delta = delta;
  p.g_prime = o.g_prime ? *o.g_prime : g + (g_star() - g) / 2.0;
  if (!(p.g_prime > g) || !(p.g_prime < g_star()))
    throw InvalidRegime("g' must lie strictly between g and g*");
  p.eps = std::min(f, p.g_prime - g) / 8.0 * (1.0 - kSlack);
  p.r_col = 6.0 * g * (1.0 + kSlack);
  p.gamma = o.gamma ? *o.gamma : 3.0 * (1.0 + kSlack);
  p.majority = choose_level_parameter(std::exp(-2.0 * p.g_prime),
                                      o.max_levels.value_or(14));
  p.b_bound = -0.5 * std::log(p.majority.beta);
  p.beta_bound = std::exp(-2.0 * p.b_bound);
  p.m_bound = (p.r_col + 4.0 * p.g_prime) * (1.0 + kSlack);
  p.r_acc =
      (p.m_bound + 2.0 * p.b_bound + 4.0 * p.g_prime) * (1.0 + kSlack);
  p.k = o.k ? *o.k : calibrated_k(f, delta, n, delta_fail);
  if (p.k < 1) throw InvalidRegime("sequence length must be positive");
  p.certificate = build_certificate(p);
  p.validate();
  return p;
}

std::int64_t calibrated_k(double f, double delta, int n, double delta_fail) {
  double denom = std::min(delta * delta, f * f);
  double value = kCalibratedC *
                 (std::log(double(n)) + std::log(1.0 / delta_fail)) / denom;
  return static_cast<std::int64_t>(std::ceil(value));
}

std::int64_t theoretical_k(const AlgoParams& p, int n, double delta_fail,
                           double big_c) {
  double denom = std::min(p.delta * p.delta, p.f * p.f);
  double value =
      big_c * (std::log(double(n)) + std::log(1.0 / delta_fail)) / denom;
  return static_cast<std::int64_t>(std::ceil(value));
}

std::string format_certificate(const AlgoParams& p) {
  std::string out = "parameter certificate\n";
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "  f=%.9g g=%.9g delta=%.9g g'=%.9g k=%lld levels=%d "
                "beta=%.9g B=%.9g\n",
                p.f, p.g, p.delta, p.g_prime, static_cast<long long>(p.k),
                p.majority.levels, p.majority.beta, p.b_bound);
  out += buf;
  for (const CertLine& line : p.certificate) {
    std::snprintf(buf, sizeof buf, "  %-40s %.9g %s %.9g   [margin %.3g]\n",
                  line.name.c_str(), line.lhs, line.relation.c_str(),
                  line.rhs, line.margin);
    out += buf;
  }
  return out;
}

}  // namespace bcp
