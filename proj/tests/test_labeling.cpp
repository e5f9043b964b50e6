#include <doctest.h>

#include <cmath>

#include "amdprog/labeling.hpp"
#include "amdprog/rng.hpp"
#include "amdprog/synthgen.hpp"
#include "test_util.hpp"

using namespace amdprog;
using namespace amdprog::testutil;

namespace {

// Independent oracle for reversal exclusion: for every prefix length, check
// directly that no non-advanced visit follows an advanced one, and return
// the longest valid prefix.
std::size_t reversal_prefix_oracle(const EyeSeries& s) {
  std::size_t best = 0;
  for (std::size_t len = 0; len <= s.visits.size(); ++len) {
    bool ok = true;
    for (std::size_t i = 0; i + 1 < len; ++i) {
      for (std::size_t j = i + 1; j < len; ++j) {
        if (s.visits[i].step12.is_advanced() &&
            !s.visits[j].step12.is_advanced()) {
          ok = false;
        }
      }
    }
    if (ok) best = len;
  }
  return best;
}

EyeSeries random_series(Rng& rng, int max_visits = 10) {
  const int n = static_cast<int>(rng.range_int(0, max_visits));
  std::vector<std::pair<int, int>> visits;
  int day = 0;
  for (int i = 0; i < n; ++i) {
    day += static_cast<int>(rng.range_int(30, 400));
    visits.push_back({day, static_cast<int>(rng.range_int(1, 12))});
  }
  return make_series("P1", Laterality::OD, visits);
}

LabeledExample one_visit_example(const std::string& pid, int day,
                                 ProgressionLabel label) {
  LabeledExample ex;
  ex.patient_id = pid;
  ex.laterality = Laterality::OD;
  ex.visit_day = day;
  ex.grade4 = Grade4::Early;
  ex.step12 = {3};
  ex.label = label;
  ex.in_none_early_iamd = true;
  return ex;
}

}  // namespace

TEST_SUITE("labeling") {

TEST_CASE("exclude_reversals drops the first reversal and everything after") {
  SUBCASE("steps [3,11,3,4] keep visits 1-2") {
    const EyeSeries s = make_series(
        "P1", Laterality::OD, {{0, 3}, {182, 11}, {364, 3}, {546, 4}});
    const EyeSeries out = exclude_reversals(s);
    REQUIRE(out.visits.size() == 2);
    CHECK(out.visits[1].step12.value == 11);
  }
  SUBCASE("no advanced visit keeps everything") {
    const EyeSeries s =
        make_series("P1", Laterality::OD, {{0, 2}, {182, 3}, {364, 5}});
    CHECK(exclude_reversals(s).visits.size() == 3);
  }
  SUBCASE("steps [10,2,11] keep visit 1 only") {
    const EyeSeries s =
        make_series("P1", Laterality::OD, {{0, 10}, {182, 2}, {364, 11}});
    const EyeSeries out = exclude_reversals(s);
    REQUIRE(out.visits.size() == 1);
    CHECK(out.visits[0].step12.value == 10);
  }
}

TEST_CASE("exclude_reversals matches the scan oracle; idempotent; prefix") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const EyeSeries s = random_series(rng);
    const EyeSeries once = exclude_reversals(s);
    CHECK(once.visits.size() == reversal_prefix_oracle(s));
    // prefix of the input
    for (std::size_t i = 0; i < once.visits.size(); ++i) {
      CHECK(once.visits[i] == s.visits[i]);
    }
    // idempotent
    const EyeSeries twice = exclude_reversals(once);
    CHECK(twice.visits == once.visits);
  }
}

TEST_CASE("derive_label on the three window scenarios") {
  const HorizonConfig h;
  SUBCASE("nvAMD at day 365 is a positive") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {365, 11}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::Progressed);
  }
  SUBCASE("graded follow-up at day 364 establishes a negative") {
    const EyeSeries s =
        make_series("P1", Laterality::OD, {{0, 5}, {182, 5}, {364, 6}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::NotProgressed);
  }
  SUBCASE("sole follow-up at day 800 leaves the label unknown") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {800, 5}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::Unknown);
  }
}

TEST_CASE("derive_label edge rules") {
  const HorizonConfig h;
  SUBCASE("CGA progression is not a positive but confirms follow-up") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {364, 10}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::NotProgressed);
  }
  SUBCASE("CGA before the window keeps the label unknown") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {100, 10}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::Unknown);
  }
  SUBCASE("early nvAMD inside the horizon is a positive") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {100, 11}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::Progressed);
  }
  SUBCASE("nvAMD just past the window is not a positive") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}, {456, 11}});
    CHECK(derive_label(s, 0, h) == ProgressionLabel::Unknown);
  }
  SUBCASE("advanced index visit is an error") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 11}, {365, 11}});
    CHECK_THROWS_AS(derive_label(s, 0, h), std::invalid_argument);
  }
  SUBCASE("index out of range") {
    const EyeSeries s = make_series("P1", Laterality::OD, {{0, 5}});
    CHECK_THROWS_AS(derive_label(s, 5, h), std::out_of_range);
  }
}

TEST_CASE("derive_label is monotone in window_hi_days") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    EyeSeries s = exclude_reversals(random_series(rng, 8));
    HorizonConfig narrow;
    HorizonConfig wide;
    wide.window_hi_days = narrow.window_hi_days +
                          static_cast<int>(rng.range_int(0, 400));
    for (std::size_t i = 0; i < s.visits.size(); ++i) {
      if (s.visits[i].step12.is_advanced()) continue;
      const ProgressionLabel a = derive_label(s, i, narrow);
      const ProgressionLabel b = derive_label(s, i, wide);
      if (a == ProgressionLabel::Progressed) {
        CHECK(b == ProgressionLabel::Progressed);
      }
    }
  }
}

TEST_CASE("build_examples on steps [5,5,11] at days [0,365,730]") {
  Dataset d({make_series("P1", Laterality::OD, {{0, 5}, {365, 5}, {730, 11}})});
  const auto examples = build_examples(d, HorizonConfig{});
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].visit_day == 0);
  CHECK(examples[0].label == ProgressionLabel::NotProgressed);
  CHECK(examples[1].visit_day == 365);
  CHECK(examples[1].label == ProgressionLabel::Progressed);
}

TEST_CASE("eye already advanced everywhere yields no examples") {
  Dataset d({make_series("P1", Laterality::OD, {{0, 11}, {182, 11}})});
  CHECK(build_examples(d, HorizonConfig{}).empty());
}

TEST_CASE("cohort flags hold on every built example") {
  GenConfig cfg;
  cfg.n_patients = 200;
  cfg.seed = 5;
  const SyntheticCohort cohort = generate(cfg);
  const auto examples = build_examples(cohort.dataset, HorizonConfig{});
  REQUIRE(!examples.empty());
  for (const LabeledExample& ex : examples) {
    CHECK_FALSE(grade4_is_advanced(ex.grade4));
    CHECK(ex.in_none_early_iamd);
    CHECK(ex.in_iamd == (ex.grade4 == Grade4::Intermediate));
    CHECK(ex.label != ProgressionLabel::Unknown);
  }
}

TEST_CASE("positives match planted conversions when noise and reversals are off") {
  GenConfig cfg;
  cfg.n_patients = 300;
  cfg.grade_noise = 0.0;
  cfg.hazard_scale = 0.8;
  cfg.seed = 9;
  const SyntheticCohort cohort = generate(cfg);
  const HorizonConfig h;
  const auto examples = build_examples(cohort.dataset, h);
  std::size_t positives = 0;
  for (const LabeledExample& ex : examples) {
    const EyeTruth& truth = cohort.truth.for_eye(ex.eye());
    const bool expected = truth.conversion_day &&
                          *truth.conversion_day > ex.visit_day &&
                          *truth.conversion_day <= ex.visit_day + h.window_hi_days;
    CHECK((ex.label == ProgressionLabel::Progressed) == expected);
    if (expected) ++positives;
  }
  CHECK(positives > 0);  // the construction must actually exercise conversions
}

TEST_CASE("adjusted_rate: all progressed gives 1.0") {
  std::vector<LabeledExample> examples = {
      one_visit_example("A", 0, ProgressionLabel::Progressed),
      one_visit_example("B", 0, ProgressionLabel::Progressed)};
  CHECK(adjusted_rate(examples, 100, 1) == 1.0);
}

TEST_CASE("adjusted_rate on the 2-eye constructed case stays near 0.25") {
  std::vector<LabeledExample> examples;
  for (int i = 0; i < 10; ++i) {
    auto ex = one_visit_example("A", i * 100, ProgressionLabel::NotProgressed);
    examples.push_back(ex);
  }
  examples.push_back(one_visit_example("B", 0, ProgressionLabel::Progressed));
  examples.push_back(one_visit_example("B", 100, ProgressionLabel::NotProgressed));

  // Sampling eye B's single positive out of 2 visits is Bernoulli(1/2); the
  // per-draw rate is that over 2 eyes, so one draw has sd 1/4 and the mean
  // of 100 draws has sd 0.025.
  const double sigma = 0.25 / std::sqrt(100.0);
  const double rate = adjusted_rate(examples, 100, 42);
  CHECK(std::abs(rate - 0.25) <= 3.0 * sigma);
}

TEST_CASE("adjusted_rate equals the plain fraction when every eye has 1 visit") {
  std::vector<LabeledExample> examples = {
      one_visit_example("A", 0, ProgressionLabel::Progressed),
      one_visit_example("B", 0, ProgressionLabel::NotProgressed),
      one_visit_example("C", 0, ProgressionLabel::NotProgressed),
      one_visit_example("D", 0, ProgressionLabel::NotProgressed)};
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 12345ull}) {
    CHECK(adjusted_rate(examples, 100, seed) == 0.25);
  }
}

TEST_CASE("adjusted_rate rejects an empty set") {
  CHECK_THROWS_AS(adjusted_rate({}, 100, 1), std::invalid_argument);
}

TEST_CASE("horizon config validation") {
  HorizonConfig h;
  h.window_lo_days = 400;
  h.horizon_days = 365;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  HorizonConfig h2;
  h2.window_hi_days = 100;
  CHECK_THROWS_AS(h2.validate(), std::invalid_argument);
}

}  // TEST_SUITE
