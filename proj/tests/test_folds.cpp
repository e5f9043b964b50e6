#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "amdprog/folds.hpp"
#include "amdprog/rng.hpp"
#include "test_util.hpp"

using namespace amdprog;

namespace {

std::vector<std::string> patient_names(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("P" + std::to_string(1000 + i));
  return ids;
}

LabeledExample example_for(const std::string& pid, Laterality lat, int day) {
  LabeledExample ex;
  ex.patient_id = pid;
  ex.laterality = lat;
  ex.visit_day = day;
  ex.grade4 = Grade4::Early;
  ex.step12 = {3};
  ex.label = day % 2 ? ProgressionLabel::Progressed : ProgressionLabel::NotProgressed;
  ex.in_none_early_iamd = true;
  return ex;
}

}  // namespace

TEST_SUITE("folds") {

TEST_CASE("25 patients into 10 folds deal sizes {3x5, 2x5}") {
  const auto ids = patient_names(25);
  const FoldPlan plan = assign_folds(ids, 10, 1);
  std::map<int, int> sizes;
  for (const auto& [pid, fold] : plan.assignment) sizes[fold]++;
  std::vector<int> counts;
  for (const auto& [fold, n] : sizes) counts.push_back(n);
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<int>{2, 2, 2, 2, 2, 3, 3, 3, 3, 3});
}

TEST_CASE("iteration roles: test=i, tune=(i+1) mod k, train has k-2 folds") {
  const FoldPlan plan = assign_folds(patient_names(30), 10, 1);
  CHECK(plan.iterations[0].test == 0);
  CHECK(plan.iterations[0].tune == 1);
  CHECK(plan.iterations[0].train.size() == 8);
  CHECK(plan.iterations[9].test == 9);
  CHECK(plan.iterations[9].tune == 0);
}

TEST_CASE("same seed reproduces the assignment; different seeds differ") {
  const auto ids = patient_names(100);
  const FoldPlan a = assign_folds(ids, 10, 7);
  const FoldPlan b = assign_folds(ids, 10, 7);
  const FoldPlan c = assign_folds(ids, 10, 8);
  CHECK(a.assignment == b.assignment);
  CHECK(a.assignment != c.assignment);
}

TEST_CASE("k larger than the patient count is an error") {
  CHECK_THROWS_AS(assign_folds(patient_names(5), 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(assign_folds(patient_names(5), 2, 1), std::invalid_argument);
}

TEST_CASE("select routes all of a patient's examples to one set") {
  const auto ids = patient_names(20);
  const FoldPlan plan = assign_folds(ids, 10, 3);
  std::vector<LabeledExample> examples;
  for (const auto& pid : ids) {
    examples.push_back(example_for(pid, Laterality::OD, 0));
    examples.push_back(example_for(pid, Laterality::OS, 1));
    examples.push_back(example_for(pid, Laterality::OD, 182));
  }
  for (int iter = 0; iter < plan.k; ++iter) {
    const SelectedExamples sel = select(plan, iter, examples);
    CHECK(sel.train.size() + sel.tune.size() + sel.test.size() == examples.size());
    std::set<std::string> train_p, tune_p, test_p;
    for (const auto& e : sel.train) train_p.insert(e.patient_id);
    for (const auto& e : sel.tune) tune_p.insert(e.patient_id);
    for (const auto& e : sel.test) test_p.insert(e.patient_id);
    for (const auto& pid : test_p) {
      CHECK(train_p.count(pid) == 0);
      CHECK(tune_p.count(pid) == 0);
    }
    for (const auto& pid : tune_p) CHECK(train_p.count(pid) == 0);
  }
}

TEST_CASE("each example is tested exactly once across the k iterations") {
  const auto ids = patient_names(23);
  const FoldPlan plan = assign_folds(ids, 7, 5);
  std::vector<LabeledExample> examples;
  for (const auto& pid : ids) {
    examples.push_back(example_for(pid, Laterality::OD, 0));
    examples.push_back(example_for(pid, Laterality::OS, 0));
  }
  std::map<std::pair<std::string, Laterality>, int> tested;
  for (int iter = 0; iter < plan.k; ++iter) {
    const SelectedExamples sel = select(plan, iter, examples);
    for (const auto& e : sel.test) tested[{e.patient_id, e.laterality}]++;
  }
  CHECK(tested.size() == examples.size() / 1);
  for (const auto& [key, count] : tested) CHECK(count == 1);
}

TEST_CASE("select rejects a patient missing from the assignment") {
  const FoldPlan plan = assign_folds(patient_names(10), 5, 1);
  std::vector<LabeledExample> examples = {example_for("UNKNOWN", Laterality::OD, 0)};
  CHECK_THROWS_WITH_AS(select(plan, 0, examples), doctest::Contains("UNKNOWN"),
                       std::invalid_argument);
  CHECK_THROWS_AS(select(plan, 5, examples), std::invalid_argument);
}

TEST_CASE("random plans: partition, balance, role coverage") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = static_cast<int>(rng.range_int(3, 12));
    const int n = static_cast<int>(rng.range_int(k, 400));
    const FoldPlan plan = assign_folds(patient_names(n), k, rng.next_u64());

    CHECK(plan.assignment.size() == static_cast<std::size_t>(n));
    std::map<int, int> sizes;
    for (const auto& [pid, fold] : plan.assignment) {
      CHECK(fold >= 0);
      CHECK(fold < k);
      sizes[fold]++;
    }
    int lo = n, hi = 0;
    for (int f = 0; f < k; ++f) {
      lo = std::min(lo, sizes[f]);
      hi = std::max(hi, sizes[f]);
    }
    CHECK(hi - lo <= 1);

    std::set<int> test_folds, tune_folds;
    for (const FoldRoles& r : plan.iterations) {
      CHECK(r.tune != r.test);
      test_folds.insert(r.test);
      tune_folds.insert(r.tune);
      std::set<int> all(r.train.begin(), r.train.end());
      all.insert(r.test);
      all.insert(r.tune);
      CHECK(all.size() == static_cast<std::size_t>(k));
    }
    CHECK(test_folds.size() == static_cast<std::size_t>(k));
    CHECK(tune_folds.size() == static_cast<std::size_t>(k));
  }
}

TEST_CASE("fold plan json round-trip") {
  const FoldPlan plan = assign_folds(patient_names(12), 4, 99);
  const FoldPlan back = FoldPlan::from_json_string(plan.to_json_string());
  CHECK(back.k == plan.k);
  CHECK(back.seed == plan.seed);
  CHECK(back.assignment == plan.assignment);
  CHECK(back.iterations.size() == plan.iterations.size());
}

}  // TEST_SUITE
