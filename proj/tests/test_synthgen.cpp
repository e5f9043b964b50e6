#include <doctest.h>

#include <cmath>

#include "amdprog/dataset_io.hpp"
#include "amdprog/labeling.hpp"
#include "amdprog/metrics.hpp"
#include "amdprog/synthgen.hpp"

using namespace amdprog;

TEST_SUITE("synthgen") {

TEST_CASE("generation is bit-identical for a fixed seed") {
  GenConfig cfg;
  cfg.n_patients = 80;
  cfg.seed = 42;
  const SyntheticCohort a = generate(cfg);
  const SyntheticCohort b = generate(cfg);
  CHECK(a.dataset == b.dataset);
  CHECK(export_jsonl_string(a.dataset) == export_jsonl_string(b.dataset));
  CHECK(a.truth.to_jsonl_string() == b.truth.to_jsonl_string());

  GenConfig other = cfg;
  other.seed = 43;
  CHECK(export_jsonl_string(generate(other).dataset) !=
        export_jsonl_string(a.dataset));
}

TEST_CASE("rendering is bit-identical for a fixed seed") {
  GenConfig cfg;
  cfg.n_patients = 2;
  cfg.with_images = true;
  cfg.seed = 9;
  const SyntheticCohort cohort = generate(cfg);
  const auto [l1, r1] = render_visit(cohort.truth.eyes[0], 0, cfg);
  const auto [l2, r2] = render_visit(cohort.truth.eyes[0], 0, cfg);
  CHECK(l1.data == l2.data);
  CHECK(r1.data == r2.data);
  CHECK(l1.data != r1.data);  // stereo views differ
}

TEST_CASE("hazard 0 plants no conversions and yields no positives") {
  GenConfig cfg;
  cfg.n_patients = 150;
  cfg.hazard_scale = 0.0;
  cfg.seed = 3;
  const SyntheticCohort cohort = generate(cfg);
  CHECK(cohort.truth.n_converted_eyes == 0);
  for (const LabeledExample& ex : build_examples(cohort.dataset, HorizonConfig{})) {
    CHECK(ex.label == ProgressionLabel::NotProgressed);
  }
}

TEST_CASE("hazard 1 at risk 1 with annual spacing saturates") {
  GenConfig cfg;
  cfg.n_patients = 100;
  cfg.hazard_scale = 1.0;
  cfg.risk_power = 0;  // risk identically 1
  cfg.visit_spacing_days = 365;
  cfg.visit_jitter_days = 0;
  cfg.visits_min = 2;
  cfg.visits_max = 5;
  cfg.seed = 8;
  const SyntheticCohort cohort = generate(cfg);
  const auto examples = build_examples(cohort.dataset, HorizonConfig{});
  std::size_t eyes_with_2_visits = 0;
  for (const EyeTruth& t : cohort.truth.eyes) {
    if (t.true_steps.size() >= 2) ++eyes_with_2_visits;
  }
  REQUIRE(!examples.empty());
  CHECK(examples.size() == eyes_with_2_visits);
  for (const LabeledExample& ex : examples) {
    CHECK(ex.label == ProgressionLabel::Progressed);
  }
}

TEST_CASE("calibrated preset lands near the target adjusted rate") {
  // Target: 3.7% +- 1.5% absolute on the none/early/iAMD cohort per eye.
  const GenConfig cfg = calibrated_preset();
  REQUIRE(cfg.n_patients == 2000);
  const SyntheticCohort cohort = generate(cfg);
  const auto examples = build_examples(cohort.dataset, HorizonConfig{});
  const double rate = adjusted_rate(examples, 100, 17);
  CHECK(rate > 0.022);
  CHECK(rate < 0.052);
}

TEST_CASE("blob count anchors: zero at (risk 0, step 1), max at (risk 1, step 9)") {
  GenConfig cfg;
  cfg.with_images = true;
  EyeTruth lo;
  lo.eye_uid = 1;
  lo.risk = 0.0;
  lo.true_steps = {1};
  CHECK(planted_blob_count(lo, 0, cfg) == 0);

  EyeTruth hi;
  hi.eye_uid = 2;
  hi.risk = 1.0;
  hi.true_steps = {9};
  CHECK(planted_blob_count(hi, 0, cfg) == cfg.max_blobs);
}

TEST_CASE("mean luminance rises with the planted blob count") {
  GenConfig cfg;
  cfg.with_images = true;
  cfg.seed = 31;
  const double risks[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  double prev = -1.0;
  int prev_blobs = -1;
  for (int level = 0; level < 5; ++level) {
    EyeTruth t;
    t.eye_uid = 100 + static_cast<std::uint64_t>(level);
    t.risk = risks[level];
    t.true_steps.assign(50, 5);
    double total = 0.0;
    for (std::size_t v = 0; v < 50; ++v) {
      const auto [left, right] = render_visit(t, v, cfg);
      for (float px : left.data) total += px;
    }
    const int blobs = planted_blob_count(t, 0, cfg);
    CHECK(blobs > prev_blobs);
    CHECK(total > prev);
    prev = total;
    prev_blobs = blobs;
  }
}

TEST_CASE("advanced visits render a distinct lesion signature") {
  GenConfig cfg;
  cfg.with_images = true;
  cfg.seed = 5;
  EyeTruth t;
  t.eye_uid = 7;
  t.risk = 0.5;
  t.true_steps = {5, 11};
  const auto [pre_l, pre_r] = render_visit(t, 0, cfg);
  const auto [post_l, post_r] = render_visit(t, 1, cfg);
  double pre_red = 0.0, post_red = 0.0;
  const std::size_t plane = static_cast<std::size_t>(cfg.image_size) * cfg.image_size;
  for (std::size_t i = 0; i < plane; ++i) {
    pre_red += pre_l.data[i] - pre_l.data[plane + i];
    post_red += post_l.data[i] - post_l.data[plane + i];
  }
  CHECK(post_red > pre_red);  // lesion raises red-green contrast
}

TEST_CASE("reversal injection: rate 0 is the identity") {
  GenConfig cfg;
  cfg.n_patients = 60;
  cfg.hazard_scale = 1.2;
  cfg.seed = 13;
  SyntheticCohort cohort = generate(cfg);
  const std::string before = export_jsonl_string(cohort.dataset);
  const Dataset after = inject_reversals(cohort.dataset, cohort.truth, 0.0, 99);
  CHECK(export_jsonl_string(after) == before);
  for (const EyeTruth& t : cohort.truth.eyes) CHECK_FALSE(t.reversal_visit.has_value());
}

TEST_CASE("reversal injection at rate 1 downgrades one post-conversion visit") {
  GenConfig cfg;
  cfg.n_patients = 80;
  cfg.risk_power = 0;
  cfg.hazard_scale = 5.0;  // convert at the second visit
  cfg.visits_min = 4;
  cfg.visits_max = 7;
  cfg.seed = 21;
  SyntheticCohort cohort = generate(cfg);
  const Dataset reversed = inject_reversals(cohort.dataset, cohort.truth, 1.0, 55);

  std::size_t injected = 0;
  for (std::size_t e = 0; e < reversed.eyes().size(); ++e) {
    const EyeSeries& eye = reversed.eyes()[e];
    const EyeTruth& truth = cohort.truth.for_eye(eye.key());
    if (!truth.conversion_day) continue;

    std::size_t first_advanced = eye.visits.size();
    for (std::size_t i = 0; i < eye.visits.size(); ++i) {
      if (eye.visits[i].step12.is_advanced()) {
        first_advanced = i;
        break;
      }
    }
    std::size_t downgraded = 0;
    for (std::size_t i = first_advanced + 1; i < eye.visits.size(); ++i) {
      if (!eye.visits[i].step12.is_advanced()) ++downgraded;
    }
    if (first_advanced + 1 < eye.visits.size()) {
      ++injected;
      CHECK(downgraded == 1);
      REQUIRE(truth.reversal_visit.has_value());
      // the reversal-filtered series is exactly the recorded prefix
      const EyeSeries kept = exclude_reversals(eye);
      CHECK(kept.visits.size() == *truth.reversal_visit);
    }
  }
  CHECK(injected > 10);
}

TEST_CASE("latent risk dominates any grade-based score") {
  GenConfig cfg;
  cfg.n_patients = 600;
  cfg.hazard_scale = 0.8;
  cfg.seed = 77;
  const SyntheticCohort cohort = generate(cfg);
  const auto examples = build_examples(cohort.dataset, HorizonConfig{});
  std::vector<ScoredExample> by_risk, by_step;
  for (const LabeledExample& ex : examples) {
    const EyeTruth& t = cohort.truth.for_eye(ex.eye());
    const bool positive = ex.label == ProgressionLabel::Progressed;
    by_risk.push_back({ex.eye(), t.risk, positive});
    by_step.push_back({ex.eye(), static_cast<double>(ex.step12.value), positive});
  }
  CHECK(auc(roc_curve(by_risk)) > auc(roc_curve(by_step)));
}

TEST_CASE("config validation") {
  GenConfig cfg;
  cfg.visit_jitter_days = 100;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  GenConfig cfg2;
  cfg2.grade_noise = 1.5;
  CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);
  GenConfig cfg3;
  cfg3.with_images = true;
  cfg3.image_size = 8;
  CHECK_THROWS_AS(cfg3.validate(), std::invalid_argument);
}

}  // TEST_SUITE
