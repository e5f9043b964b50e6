#pragma once

// Tie-aware ROC analysis, operating-point selection at a target specificity,
// and the one-visit-per-eye resampled estimators that remove the bias from
// eyes contributing different visit counts.
//
// The classify-positive rule everywhere is score >= threshold. A target
// specificity that falls between achievable thresholds is met exactly in
// expectation by a randomized rule mixing the two bracketing thresholds.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "amdprog/cohort.hpp"

namespace amdprog {

struct ScoredExample {
  EyeKey eye;
  double score = 0.0;
  bool positive = false;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Vertices sorted by (fpr, tpr), starting at (0,0) and ending at (1,1).
// Tied scores produce a single vertex. thresholds[i] is the cut value that
// realizes points[i+1]; the (0,0) start corresponds to +infinity.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

// Randomized threshold rule: apply the lenient cut with probability
// lenient_weight, the strict cut otherwise (strict >= lenient as cut values).
struct OperatingRule {
  double strict_threshold = 0.0;
  double lenient_threshold = 0.0;
  double lenient_weight = 0.0;
};

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Throws std::invalid_argument unless both classes are present and all
// scores are finite.
RocCurve roc_curve(std::span<const ScoredExample> scored);

// Trapezoidal area; equals P(score_pos > score_neg) + 0.5 P(tie).
double auc(const RocCurve& curve);

// Selects the rule achieving fpr = 1 - target_specificity exactly (in
// expectation) on the curve's data. target must lie in (0,1).
OperatingRule operating_rule(const RocCurve& selection_curve,
                             double target_specificity = 0.80);

// Closed-form expected sensitivity/specificity of the randomized rule.
SensSpec evaluate_rule(std::span<const ScoredExample> scored,
                       const OperatingRule& rule);

struct ResampleConfig {
  int n_samples = 100;
  double target_specificity = 0.80;
  std::uint64_t seed = 0;
};

struct FoldMetrics {
  double auc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  int auc_skipped_draws = 0;   // single-class test draws
  int rule_skipped_draws = 0;  // single-class tuning draws
  OperatingRule rule;
};

// Per-fold metrics under one-visit-per-eye resampling. The operating rule is
// derived from the tuning set (its parameters averaged over the same number
// of tuning draws); test metrics are averaged over n_samples test draws.
// Deterministic given cfg.seed and independent of input ordering.
FoldMetrics resampled_metrics(std::span<const ScoredExample> test,
                              std::span<const ScoredExample> tuning,
                              const ResampleConfig& cfg);

struct QuartileRates {
  std::array<double, 4> rates{};  // rates[3] = highest-score quartile
  int skipped_draws = 0;          // draws with fewer than 4 examples
};

// Per draw: rank by score (ties broken by eye key), cut into 4 contiguous
// rank blocks (remainder spread over the lower quartiles), take the positive
// rate per block; averaged over draws.
QuartileRates quartile_rates(std::span<const ScoredExample> scored,
                             int n_samples, std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1)
};

// Throws std::invalid_argument when fewer than 2 values are given.
MeanStd aggregate(std::span<const double> fold_values);

}  // namespace amdprog
