#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "bcp/harness.hpp"
#include "bcp/model.hpp"
#include "bcp/tree.hpp"

using namespace bcp;

// ---------------------------------------------------------------------------
// Brute-force enumeration oracle
// ---------------------------------------------------------------------------

TEST_CASE("single-edge joint distribution matches the closed form exactly") {
  // Two leaves with the whole length on one arm: the joint is the one-edge
  // channel read off the transition matrix.
  PhyloTree t = newick_parse("(1:0.3,2:0.0);");

  SUBCASE("two states") {
    JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::cfn());
    REQUIRE(d.states == 2);
    REQUIRE(d.leaf_order == std::vector<int>{1, 2});
    REQUIRE(d.prob.size() == 4);
    double p = p_of_d(ModelSpec::cfn(), 0.3);
    CHECK(d.prob_of({0, 0}) == 0.5 * (1.0 - p));
    CHECK(d.prob_of({1, 1}) == 0.5 * (1.0 - p));
    CHECK(d.prob_of({0, 1}) == 0.5 * p);
    CHECK(d.prob_of({1, 0}) == 0.5 * p);
  }

  SUBCASE("four states") {
    JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::jc());
    REQUIRE(d.states == 4);
    REQUIRE(d.prob.size() == 16);
    double p = p_of_d(ModelSpec::jc(), 0.3);
    CHECK(d.prob_of({0, 0}) == 0.25 * (1.0 - 3.0 * p));
    CHECK(d.prob_of({2, 2}) == 0.25 * (1.0 - 3.0 * p));
    CHECK(d.prob_of({0, 3}) == 0.25 * p);
    CHECK(d.prob_of({3, 1}) == 0.25 * p);
  }
}

TEST_CASE("enumerated distribution is a distribution") {
  PhyloTree t = newick_parse("((1:0.11,2:0.23):0.08,3:0.31,(4:0.14,5:0.2):0.17);");
  JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::cfn());
  double total = 0.0;
  for (double p : d.prob) {
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("enumerated leaf correlations equal e^{-2 d(u,v)}") {
  PhyloTree t = newick_parse("((1:0.11,2:0.23):0.08,3:0.31,(4:0.14,5:0.2):0.17);");
  JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::cfn());
  for (int u = 1; u <= 5; ++u)
    for (int v = u + 1; v <= 5; ++v) {
      double dist = path_distance(t, t.node_by_label(u), t.node_by_label(v));
      double expect = std::exp(-2.0 * dist);
      CHECK(d.correlation(u, v) == doctest::Approx(expect).epsilon(1e-12));
      // The two independent enumeration oracles must agree with each other.
      double other = enumerated_pair_correlation(t, t.node_by_label(u),
                                                 t.node_by_label(v));
      CHECK(d.correlation(u, v) == doctest::Approx(other).epsilon(1e-12));
    }
}

TEST_CASE("oracle refuses trees beyond the enumeration cap") {
  // An 18-leaf star is 19 nodes: 2^19 assignments, one doubling past the cap.
  std::string star = "(1:0.1";
  for (int i = 2; i <= 18; ++i) star += "," + std::to_string(i) + ":0.1";
  star += ");";
  PhyloTree t = newick_parse(star, /*permissive=*/true);
  REQUIRE(t.nodes.size() == 19);
  CHECK_THROWS_AS(oracle_enumerate_small(t, ModelSpec::cfn()),
                  std::invalid_argument);
  // One leaf fewer sits exactly at the cap and is allowed.
  PhyloTree at_cap = newick_parse(std::string(star).replace(
                                      star.rfind(",18:0.1"), 7, ""),
                                  /*permissive=*/true);
  REQUIRE(at_cap.nodes.size() == 18);
  JointLeafDistribution d = oracle_enumerate_small(at_cap, ModelSpec::cfn());
  double total = 0.0;
  for (double p : d.prob) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Four-state data hits the cap much earlier: 10 nodes is 4^10 = 2^20.
  PhyloTree small =
      newick_parse("((1:0.1,2:0.1):0.1,(3:0.1,4:0.1):0.1,(5:0.1,6:0.1):0.1);");
  REQUIRE(small.nodes.size() == 10);
  CHECK_THROWS_AS(oracle_enumerate_small(small, ModelSpec::jc()),
                  std::invalid_argument);
}

TEST_CASE("simulated site patterns fit the enumerated distribution") {
  // Chi-square goodness of fit at 10^5 sites.  The simulation is a fixed
  // function of the seed, so the statistic is deterministic; the bound is the
  // 0.999 quantile, far above typical values for a correct sampler.
  SUBCASE("two states, four leaves") {
    PhyloTree t = newick_parse("((1:0.15,2:0.22):0.1,3:0.27,4:0.18);");
    JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::cfn());
    CharacterMatrix m = simulate(t, ModelSpec::cfn(), 100000, 20260814);
    std::vector<std::int64_t> counts = pattern_counts(m);
    REQUIRE(counts.size() == d.prob.size());
    std::int64_t total = 0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total += counts[i];
      double expect = d.prob[i] * 100000.0;
      REQUIRE(expect > 5.0);  // all 16 cells are well populated here
      chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
    }
    CHECK(total == 100000);
    CHECK(chi2 < 37.70);  // chi-square 0.999 quantile at 15 dof
  }

  SUBCASE("four states, three leaves") {
    PhyloTree t = newick_parse("(1:0.15,2:0.21,3:0.12);", /*permissive=*/true);
    JointLeafDistribution d = oracle_enumerate_small(t, ModelSpec::jc());
    CharacterMatrix m = simulate(t, ModelSpec::jc(), 100000, 917);
    std::vector<std::int64_t> counts = pattern_counts(m);
    REQUIRE(counts.size() == 64);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      double expect = d.prob[i] * 100000.0;
      REQUIRE(expect > 5.0);
      chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
    }
    CHECK(chi2 < 103.5);  // chi-square 0.999 quantile at 63 dof
  }
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

namespace {
TrialRegime desk_regime() {
  TrialRegime r;
  r.f = 0.02;
  r.g = 0.12;
  r.delta = 0.02;
  r.delta_fail = 0.1;
  return r;
}
}  // namespace

TEST_CASE("a trial is a pure function of its record header") {
  TrialRegime r = desk_regime();
  TrialRecord a = run_trial(r, 8, 4096, 42);
  TrialRecord b = run_trial(r, a.n, a.k, a.seed);
  CHECK(a.n == b.n);
  CHECK(a.k == b.k);
  CHECK(a.seed == b.seed);
  CHECK(a.success == b.success);
  CHECK(a.rf == b.rf);
  CHECK(a.iterations == b.iterations);
  CHECK(a.error == b.error);
  CHECK(a.rf >= 0);  // the run completed
}

TEST_CASE("tiny sequences fail gracefully inside a trial") {
  // 16 sites cannot support n = 8 (the multiple test keeps everything
  // infinite or the loop stalls); the trial reports failure, never throws.
  TrialRegime r = desk_regime();
  TrialRecord rec = run_trial(r, 8, 16, 7);
  CHECK_FALSE(rec.success);
}

TEST_CASE("success_rate counts, early-stops, and sinks records") {
  TrialRegime r = desk_regime();
  std::vector<TrialRecord> sink;
  SuccessEstimate full = success_rate(r, 8, 4096, 6, 11, {}, &sink);
  CHECK(full.requested == 6);
  CHECK(full.ran == 6);
  CHECK(sink.size() == 6);
  int wins = 0;
  for (const TrialRecord& rec : sink) {
    CHECK(rec.n == 8);
    CHECK(rec.k == 4096);
    wins += rec.success ? 1 : 0;
    // Aggregates recompute exactly from the per-trial records.
    TrialRecord again = run_trial(r, rec.n, rec.k, rec.seed);
    CHECK(again.success == rec.success);
    CHECK(again.rf == rec.rf);
  }
  CHECK(full.successes == wins);
  CHECK(full.rate == doctest::Approx(wins / 6.0));

  // Early stop: a target of 0 is settled after one success, a target just
  // above the achievable rate is settled once enough trials fail.
  SuccessEstimate quick = success_rate(r, 8, 4096, 6, 11, 1.0 / 6.0);
  CHECK(quick.decided_pass == (wins >= 1));
  if (wins == 6) CHECK(quick.ran == 1);
  SuccessEstimate hopeless = success_rate(r, 8, 16, 6, 11, 1.0);
  CHECK_FALSE(hopeless.decided_pass);
  CHECK(hopeless.ran == 1);  // one failure already rules out 6/6
}

TEST_CASE("success rate is monotone nondecreasing in k (within 2 sigma)") {
  TrialRegime r = desk_regime();
  const int trials = 30;
  double prev = -1.0;
  for (std::int64_t k : {8192, 32768, 131072}) {
    SuccessEstimate est = success_rate(r, 8, k, trials, 2024);
    // Two-sigma slack on the difference of two binomial proportions; with
    // common random numbers across k the sweep is in fact almost surely
    // monotone outright.
    double sigma = 2.0 * std::sqrt(2.0 * 0.25 / trials);
    if (prev >= 0.0) CHECK(est.rate >= prev - sigma);
    prev = est.rate;
  }
  CHECK(prev >= 0.8);  // by 131072 sites n = 8 is comfortably solvable
}

TEST_CASE("calibration brackets and bisects the minimal passing k") {
  TrialRegime r = desk_regime();
  std::vector<TrialRecord> sink;
  CalibrationResult cal = calibrate_k(r, 8, 0.8, 10, 99, 1024, 1 << 22, &sink);
  REQUIRE(cal.k_star > 0);
  CHECK(cal.n == 8);
  CHECK(cal.trials == 10);
  REQUIRE(!cal.probes.empty());
  // The reported k_star is the smallest probed k that passed; every probed k
  // below it failed, every probed k above it passed.
  for (const CalibrationProbe& p : cal.probes) {
    if (p.k < cal.k_star) CHECK_FALSE(p.pass);
    if (p.k >= cal.k_star) CHECK(p.pass);
  }
  // Each probe's counts recompute from the sunk records.
  for (const CalibrationProbe& p : cal.probes) {
    int ran = 0, wins = 0;
    for (const TrialRecord& rec : sink)
      if (rec.k == p.k) {
        ++ran;
        wins += rec.success ? 1 : 0;
      }
    CHECK(ran == p.ran);
    CHECK(wins == p.successes);
  }
}

TEST_CASE("scaling study rows, fit, and JSON round trip") {
  TrialRegime r = desk_regime();
  std::vector<std::string> lines;
  ExperimentResult res = experiment_scaling(
      r, {8, 16}, 0.8, 8, 555, 1e9,
      [&](const std::string& s) { lines.push_back(s); });
  CHECK(res.complete);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].n == 8);
  CHECK(res.rows[1].n == 16);
  CHECK(res.rows[0].k_star > 0);
  CHECK(res.rows[1].k_star > 0);
  CHECK(res.fit.points == 2);
  // With two points the fit interpolates: slope = dk / d(ln n).
  double expect_slope = (res.rows[1].k_star - res.rows[0].k_star) /
                        (std::log(16.0) - std::log(8.0));
  CHECK(res.fit.slope == doctest::Approx(expect_slope).epsilon(1e-9));
  CHECK(lines.size() == 2);

  std::string text = res.to_json();
  ExperimentResult back = ExperimentResult::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.rows.size() == res.rows.size());
  CHECK(back.records.size() == res.records.size());
  CHECK(back.seed0 == res.seed0);
  if (!back.records.empty()) {
    CHECK(back.records[0].seed == res.records[0].seed);
    // Round-tripped records still reproduce.
    TrialRecord again = run_trial(r, back.records[0].n, back.records[0].k,
                                  back.records[0].seed);
    CHECK(again.success == back.records[0].success);
  }
}

TEST_CASE("an exhausted budget flags the study incomplete") {
  TrialRegime r = desk_regime();
  ExperimentResult res = experiment_scaling(r, {8, 16}, 0.8, 4, 1, 0.0);
  CHECK_FALSE(res.complete);
  CHECK(res.rows.empty());
}
