#include "amdprog/folds.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "amdprog/rng.hpp"

namespace amdprog {

FoldPlan assign_folds(std::span<const std::string> patient_ids, int k,
                      std::uint64_t seed) {
  if (k < 3) {
    throw std::invalid_argument("assign_folds: k must be >= 3, got " +
                                std::to_string(k));
  }
  std::vector<std::string> ids(patient_ids.begin(), patient_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument(
        "assign_folds: need at least k=" + std::to_string(k) +
        " patients, got " + std::to_string(ids.size()));
  }
  Rng rng(seed);
  rng.shuffle(ids);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    plan.assignment[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  plan.iterations.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    FoldRoles roles;
    roles.test = i;
    roles.tune = (i + 1) % k;
    for (int f = 0; f < k; ++f) {
      if (f != roles.test && f != roles.tune) roles.train.push_back(f);
    }
    plan.iterations.push_back(std::move(roles));
  }
  return plan;
}

SelectedExamples select(const FoldPlan& plan, int iteration,
                        std::span<const LabeledExample> examples) {
  if (iteration < 0 || iteration >= plan.k) {
    throw std::invalid_argument("select: iteration " +
                                std::to_string(iteration) +
                                " out of range [0," + std::to_string(plan.k) + ")");
  }
  const FoldRoles& roles = plan.iterations[static_cast<std::size_t>(iteration)];
  const std::set<int> train_folds(roles.train.begin(), roles.train.end());
  SelectedExamples out;
  for (const LabeledExample& ex : examples) {
    auto it = plan.assignment.find(ex.patient_id);
    if (it == plan.assignment.end()) {
      throw std::invalid_argument("select: patient " + ex.patient_id +
                                  " is not in the fold assignment");
    }
    const int fold = it->second;
    if (fold == roles.test) {
      out.test.push_back(ex);
    } else if (fold == roles.tune) {
      out.tune.push_back(ex);
    } else if (train_folds.count(fold)) {
      out.train.push_back(ex);
    } else {
      throw std::invalid_argument("select: fold " + std::to_string(fold) +
                                  " outside plan");
    }
  }
  return out;
}

std::string FoldPlan::to_json_string() const {
  nlohmann::json j;
  j["k"] = k;
  j["seed"] = seed;
  j["assignment"] = assignment;
  return j.dump(2) + "\n";
}

FoldPlan FoldPlan::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::vector<std::string> ids;
  std::map<std::string, int> assignment =
      j.at("assignment").get<std::map<std::string, int>>();
  FoldPlan plan;
  plan.k = j.at("k").get<int>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.assignment = std::move(assignment);
  for (int i = 0; i < plan.k; ++i) {
    FoldRoles roles;
    roles.test = i;
    roles.tune = (i + 1) % plan.k;
    for (int f = 0; f < plan.k; ++f) {
      if (f != roles.test && f != roles.tune) roles.train.push_back(f);
    }
    plan.iterations.push_back(std::move(roles));
  }
  return plan;
}

}  // namespace amdprog
