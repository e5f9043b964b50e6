#pragma once

// 1-year progression labels. An index visit is positive when the eye carries
// an nvAMD grade at any later visit inside the follow-up window, negative
// when some later graded visit confirms the eye was still followed around
// the 1-year mark, and unknown otherwise. Unknown visits never become
// examples. Grade reversals (a non-advanced grade recorded after an advanced
// one) are an artifact of independent per-visit grading and are excluded
// together with everything that follows them.

#include <cstdint>
#include <span>
#include <vector>

#include "amdprog/cohort.hpp"

namespace amdprog {

enum class ProgressionLabel { Progressed, NotProgressed, Unknown };

enum class Cohort { NoneEarlyIntermediate, IntermediateOnly };

std::string to_string(ProgressionLabel label);
std::string to_string(Cohort cohort);
Cohort cohort_from_string(const std::string& s);

struct HorizonConfig {
  int horizon_days = 365;
  int window_lo_days = 270;
  int window_hi_days = 455;

  // 0 < lo <= horizon <= hi
  void validate() const;
};

struct LabeledExample {
  std::string patient_id;
  Laterality laterality = Laterality::OD;
  int visit_day = 0;
  Grade4 grade4 = Grade4::NoAmd;
  Step12 step12;
  std::optional<std::string> left_img;
  std::optional<std::string> right_img;
  ProgressionLabel label = ProgressionLabel::Unknown;
  bool in_none_early_iamd = false;
  bool in_iamd = false;

  EyeKey eye() const { return {patient_id, laterality}; }
  bool has_stereo() const { return left_img && right_img; }
  bool in_cohort(Cohort c) const {
    return c == Cohort::NoneEarlyIntermediate ? in_none_early_iamd : in_iamd;
  }
};

// Maximal prefix with no non-advanced grade following an advanced one.
// The first reversal visit and everything after it are dropped.
EyeSeries exclude_reversals(const EyeSeries& s);

// Label for visit `index` of a reversal-filtered series. Progression to CGA
// alone (step 10) is not a positive. Throws std::out_of_range for a bad
// index and std::invalid_argument when the index visit is already advanced.
ProgressionLabel derive_label(const EyeSeries& s, std::size_t index,
                              const HorizonConfig& h);

// Reversal-filters each eye, labels every non-advanced visit, and keeps the
// ones with a known outcome.
std::vector<LabeledExample> build_examples(const Dataset& d,
                                           const HorizonConfig& h);

// Visit-count-bias-corrected progression rate: mean over n_samples draws of
// the fraction of eyes whose single uniformly-sampled visit is positive.
// Deterministic given seed. Throws std::invalid_argument on an empty set.
double adjusted_rate(std::span<const LabeledExample> examples,
                     int n_samples = 100, std::uint64_t seed = 0);

}  // namespace amdprog
