#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bcp/model.hpp"
#include "bcp/params.hpp"
#include "bcp/tree.hpp"

namespace bcp {

// Experiment orchestration: seeded simulate-reconstruct trials, success-rate
// estimation, minimal-sequence-length calibration, the sequence-length
// scaling study, and the brute-force enumeration oracle that backs the
// simulator's distribution tests.

// Regime shared by every trial of an experiment.
struct TrialRegime {
  double f = 0.02;
  double g = 0.12;
  double delta = 0.02;
  double delta_fail = 0.1;
  int threads = 1;
};

// One simulate-then-reconstruct attempt.  Everything except wall_ms is a pure
// function of (regime, n, k, seed): the record can be regenerated by calling
// run_trial again with its own fields.
struct TrialRecord {
  int n = 0;
  std::int64_t k = 0;
  std::uint64_t seed = 0;
  bool success = false;  // exact topology: rf_distance == 0
  int rf = -1;           // -1 when the run threw before producing a tree
  int iterations = 0;
  double wall_ms = 0.0;
  std::string error;  // non-empty when the run threw (counted as a failure)
};

// Draws a fresh grid tree from the trial's seed, simulates k two-state
// characters, reconstructs, and scores exact-topology success.  Algorithm
// failures (non-convergence) are reported in the record; regime errors
// propagate because no trial protocol can fix them.
TrialRecord run_trial(const TrialRegime& regime, int n, std::int64_t k,
                      std::uint64_t seed);

struct SuccessEstimate {
  int requested = 0;  // trial budget
  int ran = 0;        // trials actually run (early stop may spare the rest)
  int successes = 0;
  double rate = 0.0;  // successes / ran
  // Decision against the early-stop target, when one was given.
  bool decided_pass = false;
};

// Runs up to `trials` seeded trials of (n, k).  With `early_stop_target` the
// loop stops as soon as the >= target question is settled either way, which
// is what the calibration search needs; without it all trials run.  Records
// are appended to `sink` when given.
SuccessEstimate success_rate(const TrialRegime& regime, int n, std::int64_t k,
                             int trials, std::uint64_t seed0,
                             std::optional<double> early_stop_target = {},
                             std::vector<TrialRecord>* sink = nullptr);

// One probe of the calibration search.
struct CalibrationProbe {
  std::int64_t k = 0;
  int ran = 0;
  int successes = 0;
  bool pass = false;
};

struct CalibrationResult {
  int n = 0;
  std::int64_t k_star = -1;  // -1 when the search hit k_cap undecided
  double target = 0.0;
  int trials = 0;
  std::vector<CalibrationProbe> probes;
};

// Smallest k (to within ~6% bracket resolution) whose success rate over
// `trials` seeded runs reaches `target`, found by doubling out from `k_hint`
// and then bisecting.  Success is assumed nondecreasing in k; the sweep test
// checks that assumption separately.  Gives up at `k_cap`.
CalibrationResult calibrate_k(const TrialRegime& regime, int n, double target,
                              int trials, std::uint64_t seed0,
                              std::int64_t k_hint = 1024,
                              std::int64_t k_cap = std::int64_t{1} << 22,
                              std::vector<TrialRecord>* sink = nullptr);

struct ScalingRow {
  int n = 0;
  std::int64_t k_star = -1;
  double rate_at_k_star = 0.0;
  std::vector<CalibrationProbe> probes;
};

// Least-squares fit of k_star against ln n.
struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};

struct ExperimentResult {
  TrialRegime regime;
  double target = 0.0;
  int trials = 0;
  std::uint64_t seed0 = 0;
  std::vector<int> ns_requested;
  std::vector<ScalingRow> rows;
  std::vector<TrialRecord> records;  // every trial behind the rows
  LogLinearFit fit;
  bool complete = true;  // false when the wall budget cut the study short

  std::string to_json() const;  // round-trips through from_json
  static ExperimentResult from_json(const std::string& text);
};

LogLinearFit fit_log_linear(const std::vector<ScalingRow>& rows);

// For each n in order, calibrates the minimal k (warm-starting each search
// from the previous answer) and fits k_star against ln n.  When the wall
// budget runs out the result keeps the rows finished so far and is flagged
// incomplete.  `progress` (when given) receives one line per probe.
ExperimentResult experiment_scaling(
    const TrialRegime& regime, const std::vector<int>& ns, double target,
    int trials, std::uint64_t seed0, double budget_seconds = 1e9,
    const std::function<void(const std::string&)>& progress = {});

// --- Brute-force distribution oracle ---------------------------------------

// Exact joint distribution of the leaf states, computed by summing the
// measure (uniform root prior times the product of edge transition
// probabilities) over every assignment of states to all nodes.
struct JointLeafDistribution {
  int states = 2;               // 2 for two-state data, 4 for ACGT
  std::vector<int> leaf_order;  // labels, ascending
  // prob[idx]: idx encodes one state per leaf in leaf_order, the first leaf
  // in the least significant digit of a base-`states` number.  Two-state
  // digit 0 is +1 and digit 1 is -1; four-state digits 0..3 are A,C,G,T
  // (matching the simulator's character order).
  std::vector<double> prob;

  double prob_of(const std::vector<int>& leaf_digits) const;
  // E[sigma_u sigma_v] under the joint (two-state only).
  double correlation(int label_u, int label_v) const;
};

// Throws std::invalid_argument when states^node_count exceeds 2^18.
JointLeafDistribution oracle_enumerate_small(const PhyloTree& t,
                                             const ModelSpec& model);

// Per-site leaf patterns of a simulated matrix, bucketed by the same index
// scheme; the chi-square goodness-of-fit test compares this against prob*k.
std::vector<std::int64_t> pattern_counts(const CharacterMatrix& m);

}  // namespace bcp
