#pragma once

// The scorer family: manual-grade baselines, two-phase grade-distribution
// scorers (mode and logistic regression), and the interface the image-based
// scorer plugs into. Higher scores always mean higher progression risk.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amdprog/labeling.hpp"

namespace amdprog {

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const LabeledExample& example) const = 0;
  virtual std::string name() const = 0;
};

// Ordinal rank of the 4-category grade (0/1/2). Advanced grades are never
// examples and raise std::invalid_argument.
double manual_grade4_score(const LabeledExample& e);

// The severity step 1-9 as a real. Throws std::invalid_argument for
// advanced steps.
double manual_step_score(const LabeledExample& e);

// A probability vector over grade classes: 5 classes for the 4-category
// scale's split form, 12 for the step scale.
struct GradeDistribution {
  std::vector<double> p;

  // non-negative, sums to 1 within 1e-6
  void validate() const;
  std::size_t size() const { return p.size(); }
};

// Ordinal index of the argmax class; ties resolve to the lowest index.
double two_phase_mode_score(const GradeDistribution& dist);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;
  bool trained = false;
  std::vector<std::string> feature_names;

  std::string to_json_string() const;
  static LogisticModel from_json_string(const std::string& text);
};

struct LrOptions {
  double l2 = 1e-4;
  double tol = 1e-8;  // stop when the gradient infinity-norm drops below
  int max_iters = 10000;
};

// Minimizes the mean negative log-likelihood plus (l2/2)*||w||^2 (bias
// unregularized) by gradient descent with backtracking line search.
// Throws std::invalid_argument on single-class labels or ragged features.
LogisticModel lr_fit(std::span<const std::vector<double>> features,
                     std::span<const int> labels, const LrOptions& opts = {});

// sigmoid(w . x + b); throws std::invalid_argument on an untrained model or
// a dimension mismatch.
double lr_score(const LogisticModel& m, const GradeDistribution& dist);
double lr_score_raw(const LogisticModel& m, std::span<const double> features);

// Mean NLL + L2 penalty and its gradient; exposed for verification.
double lr_loss(std::span<const std::vector<double>> features,
               std::span<const int> labels, std::span<const double> weights,
               double bias, double l2);
void lr_gradient(std::span<const std::vector<double>> features,
                 std::span<const int> labels, std::span<const double> weights,
                 double bias, double l2, std::span<double> grad_w,
                 double& grad_b);

}  // namespace amdprog
