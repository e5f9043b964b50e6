#include "amdprog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "amdprog/rng.hpp"

namespace amdprog {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_two_classes(std::span<const ScoredExample> scored,
                       const char* where) {
  std::size_t pos = 0, neg = 0;
  for (const ScoredExample& s : scored) {
    if (!std::isfinite(s.score)) {
      throw std::invalid_argument(std::string(where) + ": non-finite score");
    }
    (s.positive ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument(std::string(where) +
                                ": need at least one positive and one "
                                "negative example");
  }
}

double threshold_of_vertex(const RocCurve& curve, std::size_t idx) {
  return idx == 0 ? kInf : curve.thresholds[idx - 1];
}

SensSpec counts_at_threshold(std::span<const ScoredExample> scored, double t) {
  std::size_t tp = 0, fp = 0, pos = 0, neg = 0;
  for (const ScoredExample& s : scored) {
    if (s.positive) {
      ++pos;
      if (s.score >= t) ++tp;
    } else {
      ++neg;
      if (s.score >= t) ++fp;
    }
  }
  SensSpec r;
  r.sensitivity = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
  r.specificity = neg ? 1.0 - static_cast<double>(fp) / static_cast<double>(neg) : 1.0;
  return r;
}

// Eyes in canonical key order, each eye's examples in a stable order, so
// resampling is invariant to how the caller arranged the input.
struct EyeGroups {
  std::vector<std::uint64_t> key_hash;
  std::vector<std::vector<ScoredExample>> members;
};

EyeGroups group_by_eye(std::span<const ScoredExample> scored) {
  std::map<EyeKey, std::vector<ScoredExample>> groups;
  for (const ScoredExample& s : scored) groups[s.eye].push_back(s);
  EyeGroups out;
  out.key_hash.reserve(groups.size());
  out.members.reserve(groups.size());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const ScoredExample& a, const ScoredExample& b) {
                if (a.score != b.score) return a.score < b.score;
                return a.positive < b.positive;
              });
    out.key_hash.push_back(fnv1a64(key.str()));
    out.members.push_back(std::move(members));
  }
  return out;
}

void sample_draw(const EyeGroups& groups, std::uint64_t seed,
                 std::uint64_t draw, std::vector<ScoredExample>& out) {
  out.clear();
  for (std::size_t e = 0; e < groups.members.size(); ++e) {
    const auto& members = groups.members[e];
    const double u = indexed_unit(seed, draw, groups.key_hash[e]);
    auto idx = std::min(members.size() - 1,
                        static_cast<std::size_t>(u * static_cast<double>(members.size())));
    out.push_back(members[idx]);
  }
}

bool single_class(std::span<const ScoredExample> scored) {
  bool pos = false, neg = false;
  for (const ScoredExample& s : scored) (s.positive ? pos : neg) = true;
  return !(pos && neg);
}

}  // namespace

RocCurve roc_curve(std::span<const ScoredExample> scored) {
  check_two_classes(scored, "roc_curve");
  std::vector<ScoredExample> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredExample& a, const ScoredExample& b) {
              return a.score > b.score;
            });
  std::size_t pos_total = 0, neg_total = 0;
  for (const ScoredExample& s : sorted) (s.positive ? pos_total : neg_total)++;

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].score;
    // absorb the whole tie group at this cut value
    for (; i < sorted.size() && sorted[i].score == t; ++i) {
      (sorted[i].positive ? tp : fp)++;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg_total),
                            static_cast<double>(tp) / static_cast<double>(pos_total)});
    curve.thresholds.push_back(t);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

OperatingRule operating_rule(const RocCurve& curve, double target_specificity) {
  if (!(target_specificity > 0.0 && target_specificity < 1.0)) {
    throw std::invalid_argument("operating_rule: target must be in (0,1)");
  }
  const double target_fpr = 1.0 - target_specificity;
  // Last vertex with fpr <= target has the best tpr at or below the target;
  // index 0 is (0,0) so it always exists.
  std::size_t lo = 0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.points[i].fpr <= target_fpr) lo = i;
  }
  OperatingRule rule;
  if (curve.points[lo].fpr == target_fpr) {
    const double t = threshold_of_vertex(curve, lo);
    rule.strict_threshold = t;
    rule.lenient_threshold = t;
    rule.lenient_weight = 0.0;
    return rule;
  }
  const std::size_t hi = lo + 1;  // fpr_last = 1 > target, so hi is valid
  rule.strict_threshold = threshold_of_vertex(curve, lo);
  rule.lenient_threshold = threshold_of_vertex(curve, hi);
  rule.lenient_weight = (target_fpr - curve.points[lo].fpr) /
                        (curve.points[hi].fpr - curve.points[lo].fpr);
  return rule;
}

SensSpec evaluate_rule(std::span<const ScoredExample> scored,
                       const OperatingRule& rule) {
  const SensSpec strict = counts_at_threshold(scored, rule.strict_threshold);
  const SensSpec lenient = counts_at_threshold(scored, rule.lenient_threshold);
  const double w = rule.lenient_weight;
  SensSpec out;
  out.sensitivity = (1.0 - w) * strict.sensitivity + w * lenient.sensitivity;
  out.specificity = (1.0 - w) * strict.specificity + w * lenient.specificity;
  return out;
}

FoldMetrics resampled_metrics(std::span<const ScoredExample> test,
                              std::span<const ScoredExample> tuning,
                              const ResampleConfig& cfg) {
  if (test.empty() || tuning.empty()) {
    throw std::invalid_argument("resampled_metrics: empty test or tuning set");
  }
  if (cfg.n_samples < 1) {
    throw std::invalid_argument("resampled_metrics: n_samples must be >= 1");
  }
  FoldMetrics fm;

  // Rule from the tuning fold, mirroring the test-side resampling: one rule
  // per tuning draw, parameters averaged across draws.
  {
    const EyeGroups groups = group_by_eye(tuning);
    const std::uint64_t tune_seed = derive_seed(cfg.seed, fnv1a64("tune"));
    std::vector<ScoredExample> draw_set;
    double strict_sum = 0.0, lenient_sum = 0.0, weight_sum = 0.0;
    int used = 0;
    for (int d = 0; d < cfg.n_samples; ++d) {
      sample_draw(groups, tune_seed, static_cast<std::uint64_t>(d), draw_set);
      if (single_class(draw_set)) {
        ++fm.rule_skipped_draws;
        continue;
      }
      const OperatingRule r =
          operating_rule(roc_curve(draw_set), cfg.target_specificity);
      strict_sum += r.strict_threshold;
      lenient_sum += r.lenient_threshold;
      weight_sum += r.lenient_weight;
      ++used;
    }
    if (used == 0) {
      throw std::invalid_argument(
          "resampled_metrics: every tuning draw was single-class");
    }
    fm.rule.strict_threshold = strict_sum / used;
    fm.rule.lenient_threshold = lenient_sum / used;
    fm.rule.lenient_weight = weight_sum / used;
  }

  {
    const EyeGroups groups = group_by_eye(test);
    const std::uint64_t test_seed = derive_seed(cfg.seed, fnv1a64("test"));
    std::vector<ScoredExample> draw_set;
    double auc_sum = 0.0, sens_sum = 0.0, spec_sum = 0.0;
    int auc_used = 0;
    for (int d = 0; d < cfg.n_samples; ++d) {
      sample_draw(groups, test_seed, static_cast<std::uint64_t>(d), draw_set);
      if (!single_class(draw_set)) {
        auc_sum += auc(roc_curve(draw_set));
        ++auc_used;
      } else {
        ++fm.auc_skipped_draws;
      }
      const SensSpec ss = evaluate_rule(draw_set, fm.rule);
      sens_sum += ss.sensitivity;
      spec_sum += ss.specificity;
    }
    fm.auc = auc_used ? auc_sum / auc_used
                      : std::numeric_limits<double>::quiet_NaN();
    fm.sensitivity = sens_sum / cfg.n_samples;
    fm.specificity = spec_sum / cfg.n_samples;
  }
  return fm;
}

QuartileRates quartile_rates(std::span<const ScoredExample> scored,
                             int n_samples, std::uint64_t seed) {
  if (scored.empty()) {
    throw std::invalid_argument("quartile_rates: empty example set");
  }
  const EyeGroups groups = group_by_eye(scored);
  const std::uint64_t test_seed = derive_seed(seed, fnv1a64("test"));
  QuartileRates out;
  std::array<double, 4> sums{};
  int used = 0;
  std::vector<ScoredExample> draw_set;
  std::vector<std::size_t> order;
  for (int d = 0; d < n_samples; ++d) {
    sample_draw(groups, test_seed, static_cast<std::uint64_t>(d), draw_set);
    const std::size_t n = draw_set.size();
    if (n < 4) {
      ++out.skipped_draws;
      continue;
    }
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (draw_set[a].score != draw_set[b].score) {
        return draw_set[a].score < draw_set[b].score;
      }
      return draw_set[a].eye < draw_set[b].eye;
    });
    const std::size_t base = n / 4;
    const std::size_t rem = n % 4;
    std::size_t at = 0;
    for (std::size_t q = 0; q < 4; ++q) {
      const std::size_t size = base + (q < rem ? 1 : 0);
      std::size_t positives = 0;
      for (std::size_t i = 0; i < size; ++i, ++at) {
        if (draw_set[order[at]].positive) ++positives;
      }
      sums[q] += static_cast<double>(positives) / static_cast<double>(size);
    }
    ++used;
  }
  if (used > 0) {
    for (std::size_t q = 0; q < 4; ++q) out.rates[q] = sums[q] / used;
  }
  return out;
}

MeanStd aggregate(std::span<const double> fold_values) {
  if (fold_values.size() < 2) {
    throw std::invalid_argument("aggregate: need at least 2 fold values");
  }
  const double n = static_cast<double>(fold_values.size());
  double sum = 0.0;
  for (double v : fold_values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : fold_values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace amdprog
