#pragma once

// Shared helpers for constructing small cohorts by hand.

#include <string>
#include <utility>
#include <vector>

#include "amdprog/cohort.hpp"

namespace amdprog::testutil {

inline Grade4 grade_for_step(int step) {
  if (step <= 1) return Grade4::NoAmd;
  if (step <= 4) return Grade4::Early;
  if (step <= 9) return Grade4::Intermediate;
  if (step == 10) return Grade4::Cga;
  return Grade4::Neovascular;
}

inline VisitRecord make_visit(const std::string& pid, Laterality lat, int day,
                              int step) {
  VisitRecord v;
  v.patient_id = pid;
  v.laterality = lat;
  v.visit_day = day;
  v.step12.value = step;
  v.grade4 = grade_for_step(step);
  return v;
}

// steps_by_day: (day, step) pairs in visit order
inline EyeSeries make_series(const std::string& pid, Laterality lat,
                             const std::vector<std::pair<int, int>>& steps_by_day) {
  EyeSeries s{pid, lat, {}};
  for (const auto& [day, step] : steps_by_day) {
    s.visits.push_back(make_visit(pid, lat, day, step));
  }
  return s;
}

}  // namespace amdprog::testutil
