#pragma once

// Core domain types: patients, eyes, visits, and the two AMD grading scales.

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amdprog {

// Four-category AMD scale with the advanced category split into its two
// forms: central geographic atrophy, and neovascular AMD (with or without
// CGA).
enum class Grade4 { NoAmd, Early, Intermediate, Cga, Neovascular };

enum class Laterality { OD, OS };

// NoAMD/Early/Intermediate form an ordinal scale (0/1/2); CGA and
// Neovascular are terminal states with no ordinal rank.
int grade4_rank(Grade4 g);
bool grade4_is_advanced(Grade4 g);
std::string to_string(Grade4 g);
Grade4 grade4_from_string(const std::string& s);

std::string to_string(Laterality lat);
Laterality laterality_from_string(const std::string& s);

// Severity step: 1-9 graded severity, 10 = CGA, 11 = nvAMD, 12 = CGA+nvAMD.
struct Step12 {
  int value = 1;

  bool is_advanced() const { return value >= 10; }
  bool valid() const { return value >= 1 && value <= 12; }
  auto operator<=>(const Step12&) const = default;
};

// The two scales must agree on advanced status:
// grade4 in {CGA, Neovascular} <=> step >= 10, CGA <=> 10, nvAMD <=> 11|12.
bool grades_consistent(Grade4 g, Step12 s);

struct VisitRecord {
  std::string patient_id;
  Laterality laterality = Laterality::OD;
  int visit_day = 0;  // days since patient baseline
  Grade4 grade4 = Grade4::NoAmd;
  Step12 step12;
  std::optional<std::string> left_img;
  std::optional<std::string> right_img;

  bool has_stereo() const { return left_img && right_img; }
};

struct EyeKey {
  std::string patient_id;
  Laterality laterality = Laterality::OD;

  auto operator<=>(const EyeKey&) const = default;
  std::string str() const { return patient_id + "/" + to_string(laterality); }
};

// One eye's full longitudinal history, visits ordered by day.
struct EyeSeries {
  std::string patient_id;
  Laterality laterality = Laterality::OD;
  std::vector<VisitRecord> visits;

  EyeKey key() const { return {patient_id, laterality}; }
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<EyeSeries> eyes);

  const std::vector<EyeSeries>& eyes() const { return eyes_; }
  // patient_id -> indices into eyes()
  const std::map<std::string, std::vector<std::size_t>>& patients() const {
    return patients_;
  }

  std::size_t visit_count() const;
  std::vector<std::string> patient_ids() const;

  bool operator==(const Dataset& other) const;

 private:
  // Throws std::invalid_argument on any invariant violation: duplicate eye
  // keys, non-increasing visit days, inconsistent grades, negative days.
  void validate_and_index();

  std::vector<EyeSeries> eyes_;  // sorted by (patient_id, laterality)
  std::map<std::string, std::vector<std::size_t>> patients_;
};

struct SummaryStats {
  std::size_t n_patients = 0;
  std::size_t n_eyes = 0;
  std::size_t n_visits = 0;
  std::array<std::size_t, 5> grade4_hist{};  // indexed by Grade4
  std::array<std::size_t, 12> step_hist{};   // index i = step i+1
  double median_visits_per_eye = 0.0;
};

SummaryStats summary(const Dataset& d);

inline bool operator==(const VisitRecord& a, const VisitRecord& b) {
  return a.patient_id == b.patient_id && a.laterality == b.laterality &&
         a.visit_day == b.visit_day && a.grade4 == b.grade4 &&
         a.step12 == b.step12 && a.left_img == b.left_img &&
         a.right_img == b.right_img;
}

inline bool operator==(const EyeSeries& a, const EyeSeries& b) {
  return a.patient_id == b.patient_id && a.laterality == b.laterality &&
         a.visits == b.visits;
}

}  // namespace amdprog
