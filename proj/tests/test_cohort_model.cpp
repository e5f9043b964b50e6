#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amdprog/cohort.hpp"
#include "amdprog/dataset_io.hpp"
#include "amdprog/synthgen.hpp"
#include "test_util.hpp"

using namespace amdprog;
using namespace amdprog::testutil;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_SUITE("cohort_model") {

TEST_CASE("grade/step consistency predicate") {
  CHECK(grades_consistent(Grade4::NoAmd, {1}));
  CHECK(grades_consistent(Grade4::Intermediate, {9}));
  CHECK(grades_consistent(Grade4::Cga, {10}));
  CHECK(grades_consistent(Grade4::Neovascular, {11}));
  CHECK(grades_consistent(Grade4::Neovascular, {12}));
  CHECK_FALSE(grades_consistent(Grade4::Intermediate, {11}));
  CHECK_FALSE(grades_consistent(Grade4::Cga, {11}));
  CHECK_FALSE(grades_consistent(Grade4::Neovascular, {10}));
  CHECK_FALSE(grades_consistent(Grade4::NoAmd, {10}));
}

TEST_CASE("grade4 ordinal rank covers the non-advanced grades only") {
  CHECK(grade4_rank(Grade4::NoAmd) == 0);
  CHECK(grade4_rank(Grade4::Early) == 1);
  CHECK(grade4_rank(Grade4::Intermediate) == 2);
  CHECK_THROWS_AS(grade4_rank(Grade4::Cga), std::invalid_argument);
  CHECK_THROWS_AS(grade4_rank(Grade4::Neovascular), std::invalid_argument);
}

TEST_CASE("ingest jsonl: 2 patients x 2 eyes x 3 visits") {
  std::string text;
  for (const char* pid : {"P1", "P2"}) {
    for (const char* eye : {"OD", "OS"}) {
      for (int i = 0; i < 3; ++i) {
        text += std::string("{\"patient_id\":\"") + pid + "\",\"eye\":\"" +
                eye + "\",\"day\":" + std::to_string(i * 182) +
                ",\"grade4\":\"early\",\"step\":3}\n";
      }
    }
  }
  const Dataset d = ingest_jsonl_string(text);
  CHECK(d.eyes().size() == 4);
  CHECK(d.visit_count() == 12);
  CHECK(d.patients().size() == 2);
}

TEST_CASE("ingest rejects grade4/step inconsistency naming the visit") {
  const std::string text =
      "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":0,"
      "\"grade4\":\"intermediate\",\"step\":11}\n";
  CHECK_THROWS_WITH_AS(ingest_jsonl_string(text),
                       doctest::Contains("inconsistent grades"),
                       std::invalid_argument);
}

TEST_CASE("ingest names the line and problem on malformed records") {
  SUBCASE("bad json") {
    CHECK_THROWS_WITH_AS(ingest_jsonl_string("{\"patient_id\":\"P1\"\n"),
                         doctest::Contains("line 1"), std::runtime_error);
  }
  SUBCASE("missing field") {
    const std::string text =
        "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":0,\"grade4\":\"none\",\"step\":1}\n"
        "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":100,\"grade4\":\"none\"}\n";
    CHECK_THROWS_WITH_AS(ingest_jsonl_string(text),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(ingest_jsonl_string(text), doctest::Contains("step"),
                         std::runtime_error);
  }
  SUBCASE("bad enum value") {
    const std::string text =
        "{\"patient_id\":\"P1\",\"eye\":\"LEFT\",\"day\":0,\"grade4\":\"none\",\"step\":1}\n";
    CHECK_THROWS_WITH_AS(ingest_jsonl_string(text), doctest::Contains("eye"),
                         std::runtime_error);
  }
}

TEST_CASE("ingest rejects duplicate (patient, eye, day)") {
  const std::string rec =
      "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":0,\"grade4\":\"none\",\"step\":1}\n";
  CHECK_THROWS_WITH_AS(ingest_jsonl_string(rec + rec),
                       doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("ingest sorts visits by day within an eye") {
  const std::string text =
      "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":364,\"grade4\":\"none\",\"step\":1}\n"
      "{\"patient_id\":\"P1\",\"eye\":\"OD\",\"day\":0,\"grade4\":\"none\",\"step\":1}\n";
  const Dataset d = ingest_jsonl_string(text);
  REQUIRE(d.eyes().size() == 1);
  CHECK(d.eyes()[0].visits[0].visit_day == 0);
  CHECK(d.eyes()[0].visits[1].visit_day == 364);
}

TEST_CASE("csv ingest matches jsonl ingest") {
  const fs::path csv = temp_file("amdprog_test_ingest.csv");
  write_file(csv,
             "patient_id,eye,day,grade4,step,left_img,right_img\n"
             "P1,OD,0,early,3,,\n"
             "P1,OD,182,intermediate,5,a.png,b.png\n");
  const Dataset d = ingest(csv, RecordFormat::Csv);
  REQUIRE(d.eyes().size() == 1);
  CHECK(d.eyes()[0].visits.size() == 2);
  CHECK_FALSE(d.eyes()[0].visits[0].has_stereo());
  CHECK(d.eyes()[0].visits[1].has_stereo());
  CHECK(*d.eyes()[0].visits[1].left_img == "a.png");
  fs::remove(csv);
}

TEST_CASE("csv requires the fixed header") {
  const fs::path csv = temp_file("amdprog_test_noheader.csv");
  write_file(csv, "P1,OD,0,early,3,,\n");
  CHECK_THROWS_WITH_AS(ingest(csv), doctest::Contains("header"),
                       std::runtime_error);
  fs::remove(csv);
}

TEST_CASE("summary of an empty dataset is all zeros") {
  const SummaryStats s = summary(Dataset{});
  CHECK(s.n_patients == 0);
  CHECK(s.n_eyes == 0);
  CHECK(s.n_visits == 0);
  CHECK(s.median_visits_per_eye == 0.0);
}

TEST_CASE("summary histograms: steps [1, 1, 11]") {
  Dataset d({make_series("P1", Laterality::OD,
                         {{0, 1}, {182, 1}, {364, 11}})});
  const SummaryStats s = summary(d);
  CHECK(s.n_visits == 3);
  CHECK(s.step_hist[0] == 2);   // step 1
  CHECK(s.step_hist[10] == 1);  // step 11
  CHECK(s.grade4_hist[static_cast<int>(Grade4::NoAmd)] == 2);
  CHECK(s.grade4_hist[static_cast<int>(Grade4::Neovascular)] == 1);
  CHECK(s.median_visits_per_eye == 3.0);

  std::size_t g4_total = 0, step_total = 0;
  for (auto c : s.grade4_hist) g4_total += c;
  for (auto c : s.step_hist) step_total += c;
  CHECK(g4_total == s.n_visits);
  CHECK(step_total == s.n_visits);
}

TEST_CASE("summary counts agree with generator bookkeeping") {
  GenConfig cfg;
  cfg.n_patients = 500;
  cfg.seed = 7;
  const SyntheticCohort cohort = generate(cfg);
  const SummaryStats s = summary(cohort.dataset);
  CHECK(s.n_patients == cohort.truth.n_patients);
  CHECK(s.n_eyes == cohort.truth.n_eyes);
  CHECK(s.n_visits == cohort.truth.n_visits);
}

TEST_CASE("export . ingest round-trips, byte-identically on re-export") {
  GenConfig cfg;
  cfg.n_patients = 100;
  cfg.seed = 3;
  const SyntheticCohort cohort = generate(cfg);
  const std::string once = export_jsonl_string(cohort.dataset);
  const Dataset back = ingest_jsonl_string(once);
  CHECK(back == cohort.dataset);
  CHECK(export_jsonl_string(back) == once);
}

TEST_CASE("dataset rejects duplicate eyes and unsorted days at construction") {
  CHECK_THROWS_AS(Dataset({make_series("P1", Laterality::OD, {{0, 1}}),
                           make_series("P1", Laterality::OD, {{10, 1}})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Dataset({make_series("P1", Laterality::OD,
                                       {{100, 1}, {50, 1}})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Dataset({make_series("P1", Laterality::OD, {{-1, 1}})}),
                  std::invalid_argument);
}

}  // TEST_SUITE
