#include "amdprog/labeling.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "amdprog/rng.hpp"

namespace amdprog {

std::string to_string(ProgressionLabel label) {
  switch (label) {
    case ProgressionLabel::Progressed: return "progressed";
    case ProgressionLabel::NotProgressed: return "not_progressed";
    case ProgressionLabel::Unknown: return "unknown";
  }
  return "?";
}

std::string to_string(Cohort cohort) {
  return cohort == Cohort::NoneEarlyIntermediate ? "none_early_iamd" : "iamd";
}

Cohort cohort_from_string(const std::string& s) {
  if (s == "none_early_iamd") return Cohort::NoneEarlyIntermediate;
  if (s == "iamd") return Cohort::IntermediateOnly;
  throw std::invalid_argument("unknown cohort '" + s + "'");
}

void HorizonConfig::validate() const {
  if (!(0 < window_lo_days && window_lo_days <= horizon_days &&
        horizon_days <= window_hi_days)) {
    throw std::invalid_argument(
        "horizon window must satisfy 0 < lo <= horizon <= hi, got lo=" +
        std::to_string(window_lo_days) + " horizon=" +
        std::to_string(horizon_days) + " hi=" + std::to_string(window_hi_days));
  }
}

EyeSeries exclude_reversals(const EyeSeries& s) {
  EyeSeries out{s.patient_id, s.laterality, {}};
  bool seen_advanced = false;
  for (const VisitRecord& v : s.visits) {
    const bool advanced = v.step12.is_advanced();
    if (seen_advanced && !advanced) break;  // reversal: drop from here on
    seen_advanced = seen_advanced || advanced;
    out.visits.push_back(v);
  }
  return out;
}

ProgressionLabel derive_label(const EyeSeries& s, std::size_t index,
                              const HorizonConfig& h) {
  h.validate();
  if (index >= s.visits.size()) {
    throw std::out_of_range("derive_label: visit index " +
                            std::to_string(index) + " out of range (" +
                            std::to_string(s.visits.size()) + " visits)");
  }
  const VisitRecord& at = s.visits[index];
  if (at.step12.is_advanced()) {
    throw std::invalid_argument(
        "derive_label: index visit is already advanced (step " +
        std::to_string(at.step12.value) + ")");
  }
  bool window_grade_seen = false;
  for (std::size_t j = index + 1; j < s.visits.size(); ++j) {
    const VisitRecord& v = s.visits[j];
    const int offset = v.visit_day - at.visit_day;
    if (offset > h.window_hi_days) break;
    if (v.step12.value == 11 || v.step12.value == 12) {
      return ProgressionLabel::Progressed;
    }
    if (offset >= h.window_lo_days) window_grade_seen = true;
  }
  return window_grade_seen ? ProgressionLabel::NotProgressed
                           : ProgressionLabel::Unknown;
}

std::vector<LabeledExample> build_examples(const Dataset& d,
                                           const HorizonConfig& h) {
  h.validate();
  std::vector<LabeledExample> out;
  for (const EyeSeries& raw : d.eyes()) {
    const EyeSeries eye = exclude_reversals(raw);
    for (std::size_t i = 0; i < eye.visits.size(); ++i) {
      const VisitRecord& v = eye.visits[i];
      if (v.step12.is_advanced()) continue;
      const ProgressionLabel label = derive_label(eye, i, h);
      if (label == ProgressionLabel::Unknown) continue;
      LabeledExample ex;
      ex.patient_id = v.patient_id;
      ex.laterality = v.laterality;
      ex.visit_day = v.visit_day;
      ex.grade4 = v.grade4;
      ex.step12 = v.step12;
      ex.left_img = v.left_img;
      ex.right_img = v.right_img;
      ex.label = label;
      ex.in_none_early_iamd = !grade4_is_advanced(v.grade4);
      ex.in_iamd = v.grade4 == Grade4::Intermediate;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

double adjusted_rate(std::span<const LabeledExample> examples, int n_samples,
                     std::uint64_t seed) {
  if (examples.empty()) {
    throw std::invalid_argument("adjusted_rate: empty example set");
  }
  if (n_samples < 1) {
    throw std::invalid_argument("adjusted_rate: n_samples must be >= 1");
  }
  std::map<EyeKey, std::vector<const LabeledExample*>> by_eye;
  for (const LabeledExample& ex : examples) by_eye[ex.eye()].push_back(&ex);
  // Canonical within-eye order so the draw does not depend on input order.
  for (auto& [key, visits] : by_eye) {
    std::sort(visits.begin(), visits.end(),
              [](const LabeledExample* a, const LabeledExample* b) {
                return a->visit_day < b->visit_day;
              });
  }
  double total = 0.0;
  for (int draw = 0; draw < n_samples; ++draw) {
    std::size_t progressed = 0;
    for (const auto& [key, visits] : by_eye) {
      const double u = indexed_unit(seed, static_cast<std::uint64_t>(draw),
                                    fnv1a64(key.str()));
      auto idx = std::min(visits.size() - 1,
                          static_cast<std::size_t>(u * static_cast<double>(visits.size())));
      if (visits[idx]->label == ProgressionLabel::Progressed) ++progressed;
    }
    total += static_cast<double>(progressed) / static_cast<double>(by_eye.size());
  }
  return total / static_cast<double>(n_samples);
}

}  // namespace amdprog
