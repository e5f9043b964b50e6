#pragma once

// Deterministic synthetic cohort and fundus-image generator with a planted,
// tunable progression signal. Each eye carries a latent risk in [0,1] that
// drives both its severity-step trajectory and its conversion hazard, so the
// true risk is the generative cause of progression and every pipeline stage
// can be checked against recorded ground truth. All randomness flows from
// integer-state generators and the arithmetic avoids transcendental libm
// calls, so output is bit-identical across runs and platforms for a fixed
// seed.

#include <cstdint>
#include <optional>
#include <utility>

#include "amdprog/cohort.hpp"
#include "amdprog/image.hpp"

namespace amdprog {

struct GenConfig {
  int n_patients = 100;
  int visits_min = 3;
  int visits_max = 9;
  int visit_spacing_days = 182;
  int visit_jitter_days = 14;   // must stay below spacing/2
  double second_eye_prob = 0.97;

  // latent risk r = u^risk_power for u ~ U[0,1); integer power keeps the
  // arithmetic exact
  int risk_power = 2;

  // Conversion fires per inter-visit interval with probability
  // min(1, hazard_scale * r^hazard_power * days/365): a per-year rate,
  // linearly prorated. The converted eye is graded step 11 from the visit
  // where the conversion is observed.
  double hazard_scale = 0.28;
  int hazard_power = 2;

  // per-visit chance of advancing one severity step, scaled by risk
  double step_drift = 0.30;

  // chance a recorded non-advanced step is off by one from the true step;
  // never crosses the advanced boundary
  double grade_noise = 0.30;

  double reversal_injection_rate = 0.0;

  bool with_images = false;
  int image_size = 64;
  double drusen_signal = 1.0;  // scales blob severity; 1 spans the full range
  int max_blobs = 24;
  double stereo_noise = 0.015;  // per-pixel uniform noise amplitude

  std::uint64_t seed = 1;

  void validate() const;
};

struct EyeTruth {
  std::string patient_id;
  Laterality laterality = Laterality::OD;
  std::uint64_t eye_uid = 0;  // stable index used for render sub-seeding
  double risk = 0.0;
  std::optional<int> conversion_day;
  std::vector<int> true_steps;  // per visit, before grade noise
  std::optional<std::size_t> reversal_visit;  // set by inject_reversals
};

struct GroundTruth {
  std::vector<EyeTruth> eyes;  // same order as Dataset.eyes()
  std::size_t n_patients = 0;
  std::size_t n_eyes = 0;
  std::size_t n_visits = 0;
  std::size_t n_converted_eyes = 0;

  const EyeTruth& for_eye(const EyeKey& key) const;
  std::string to_jsonl_string() const;
};

struct SyntheticCohort {
  Dataset dataset;
  GroundTruth truth;
};

SyntheticCohort generate(const GenConfig& cfg);

// Renders the stereo pair for one visit: dark field, inscribed bright disk,
// and drusen-like blobs whose count and size grow with latent risk and the
// true severity step. The two images differ by a small (<= 2 px) rigid
// jitter and independent pixel noise.
std::pair<Image, Image> render_visit(const EyeTruth& eye,
                                     std::size_t visit_index,
                                     const GenConfig& cfg);

// Blob count render_visit plants for that visit: monotone in latent risk and
// the true step, 0 at (risk 0, step 1), max_blobs at (risk 1, step 9).
int planted_blob_count(const EyeTruth& eye, std::size_t visit_index,
                       const GenConfig& cfg);

// Downgrades one post-conversion visit of the given fraction of converted
// eyes below step 10, recording the injected position in the ground truth.
Dataset inject_reversals(const Dataset& dataset, GroundTruth& truth,
                         double rate, std::uint64_t seed);

// Default preset: hazard calibrated by bisection so the adjusted 1-year
// progression rate of the none/early/intermediate cohort lands near the
// 3.7%-per-eye AREDS figure at the 2,000-patient scale.
GenConfig calibrated_preset();

}  // namespace amdprog
