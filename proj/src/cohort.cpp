#include "amdprog/cohort.hpp"

#include <algorithm>
#include <stdexcept>

namespace amdprog {

int grade4_rank(Grade4 g) {
  switch (g) {
    case Grade4::NoAmd: return 0;
    case Grade4::Early: return 1;
    case Grade4::Intermediate: return 2;
    default:
      throw std::invalid_argument(
          "grade4_rank: advanced grade '" + to_string(g) +
          "' has no ordinal rank");
  }
}

bool grade4_is_advanced(Grade4 g) {
  return g == Grade4::Cga || g == Grade4::Neovascular;
}

std::string to_string(Grade4 g) {
  switch (g) {
    case Grade4::NoAmd: return "none";
    case Grade4::Early: return "early";
    case Grade4::Intermediate: return "intermediate";
    case Grade4::Cga: return "cga";
    case Grade4::Neovascular: return "nvamd";
  }
  return "?";
}

Grade4 grade4_from_string(const std::string& s) {
  if (s == "none") return Grade4::NoAmd;
  if (s == "early") return Grade4::Early;
  if (s == "intermediate") return Grade4::Intermediate;
  if (s == "cga") return Grade4::Cga;
  if (s == "nvamd") return Grade4::Neovascular;
  throw std::invalid_argument("unknown grade4 value '" + s + "'");
}

std::string to_string(Laterality lat) {
  return lat == Laterality::OD ? "OD" : "OS";
}

Laterality laterality_from_string(const std::string& s) {
  if (s == "OD") return Laterality::OD;
  if (s == "OS") return Laterality::OS;
  throw std::invalid_argument("unknown eye value '" + s + "' (want OD or OS)");
}

bool grades_consistent(Grade4 g, Step12 s) {
  if (!s.valid()) return false;
  switch (g) {
    case Grade4::Cga: return s.value == 10;
    case Grade4::Neovascular: return s.value == 11 || s.value == 12;
    default: return s.value < 10;
  }
}

Dataset::Dataset(std::vector<EyeSeries> eyes) : eyes_(std::move(eyes)) {
  validate_and_index();
}

void Dataset::validate_and_index() {
  std::sort(eyes_.begin(), eyes_.end(), [](const EyeSeries& a, const EyeSeries& b) {
    return a.key() < b.key();
  });
  for (std::size_t i = 0; i < eyes_.size(); ++i) {
    const EyeSeries& eye = eyes_[i];
    if (i > 0 && eyes_[i - 1].key() == eye.key()) {
      throw std::invalid_argument("duplicate eye " + eye.key().str());
    }
    int prev_day = -1;
    for (const VisitRecord& v : eye.visits) {
      if (v.patient_id != eye.patient_id || v.laterality != eye.laterality) {
        throw std::invalid_argument("visit does not belong to eye " +
                                    eye.key().str());
      }
      if (v.visit_day < 0) {
        throw std::invalid_argument("negative visit day for eye " +
                                    eye.key().str());
      }
      if (v.visit_day <= prev_day) {
        throw std::invalid_argument(
            "visit days not strictly increasing for eye " + eye.key().str() +
            " at day " + std::to_string(v.visit_day));
      }
      prev_day = v.visit_day;
      if (!v.step12.valid()) {
        throw std::invalid_argument("step out of range [1,12] for eye " +
                                    eye.key().str() + " day " +
                                    std::to_string(v.visit_day));
      }
      if (!grades_consistent(v.grade4, v.step12)) {
        throw std::invalid_argument(
            "inconsistent grades for eye " + eye.key().str() + " day " +
            std::to_string(v.visit_day) + ": grade4=" + to_string(v.grade4) +
            " step=" + std::to_string(v.step12.value));
      }
    }
    patients_[eye.patient_id].push_back(i);
  }
  for (const auto& [pid, idxs] : patients_) {
    if (idxs.size() > 2) {
      throw std::invalid_argument("patient " + pid + " has " +
                                  std::to_string(idxs.size()) + " eyes");
    }
  }
}

std::size_t Dataset::visit_count() const {
  std::size_t n = 0;
  for (const EyeSeries& e : eyes_) n += e.visits.size();
  return n;
}

std::vector<std::string> Dataset::patient_ids() const {
  std::vector<std::string> ids;
  ids.reserve(patients_.size());
  for (const auto& [pid, _] : patients_) ids.push_back(pid);
  return ids;
}

bool Dataset::operator==(const Dataset& other) const {
  return eyes_ == other.eyes_;
}

SummaryStats summary(const Dataset& d) {
  SummaryStats s;
  s.n_patients = d.patients().size();
  s.n_eyes = d.eyes().size();
  std::vector<std::size_t> per_eye;
  per_eye.reserve(d.eyes().size());
  for (const EyeSeries& eye : d.eyes()) {
    per_eye.push_back(eye.visits.size());
    for (const VisitRecord& v : eye.visits) {
      ++s.n_visits;
      ++s.grade4_hist[static_cast<std::size_t>(v.grade4)];
      ++s.step_hist[static_cast<std::size_t>(v.step12.value - 1)];
    }
  }
  if (!per_eye.empty()) {
    std::sort(per_eye.begin(), per_eye.end());
    const std::size_t n = per_eye.size();
    s.median_visits_per_eye =
        (n % 2 == 1) ? static_cast<double>(per_eye[n / 2])
                     : (static_cast<double>(per_eye[n / 2 - 1]) +
                        static_cast<double>(per_eye[n / 2])) /
                           2.0;
  }
  return s;
}

}  // namespace amdprog
