#pragma once

// Patient-exclusive k-fold partitioning. Folds are balanced in patient
// count; iteration i tests on fold i, tunes on fold (i+1) mod k, and trains
// on the rest, so every fold serves each role exactly once across the k
// iterations. Both eyes of a patient always land in the same fold.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "amdprog/labeling.hpp"

namespace amdprog {

struct FoldRoles {
  int test = 0;
  int tune = 0;
  std::vector<int> train;
};

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // patient_id -> fold
  std::vector<FoldRoles> iterations;

  std::string to_json_string() const;
  static FoldPlan from_json_string(const std::string& text);
};

// Shuffles patients with the given seed and deals them round-robin.
// Requires |patient_ids| >= k >= 3.
FoldPlan assign_folds(std::span<const std::string> patient_ids, int k,
                      std::uint64_t seed);

struct SelectedExamples {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> tune;
  std::vector<LabeledExample> test;
};

// Routes examples by their patient's fold. Throws std::invalid_argument for
// a patient missing from the assignment or an iteration out of range.
SelectedExamples select(const FoldPlan& plan, int iteration,
                        std::span<const LabeledExample> examples);

}  // namespace amdprog
