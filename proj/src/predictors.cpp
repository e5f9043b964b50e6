#include "amdprog/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace amdprog {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double dot_affine(std::span<const double> w, std::span<const double> x,
                  double bias) {
  double z = bias;
  for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
  return z;
}

}  // namespace

double manual_grade4_score(const LabeledExample& e) {
  if (grade4_is_advanced(e.grade4)) {
    throw std::invalid_argument(
        "manual_grade4_score: advanced grade at index visit");
  }
  return static_cast<double>(grade4_rank(e.grade4));
}

double manual_step_score(const LabeledExample& e) {
  if (e.step12.is_advanced()) {
    throw std::invalid_argument("manual_step_score: step " +
                                std::to_string(e.step12.value) +
                                " is advanced");
  }
  return static_cast<double>(e.step12.value);
}

void GradeDistribution::validate() const {
  if (p.empty()) throw std::invalid_argument("empty grade distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument("grade distribution has a negative entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("grade distribution sums to " +
                                std::to_string(sum) + ", expected 1");
  }
}

double two_phase_mode_score(const GradeDistribution& dist) {
  dist.validate();
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.p.size(); ++i) {
    if (dist.p[i] > dist.p[best]) best = i;
  }
  return static_cast<double>(best);
}

double lr_loss(std::span<const std::vector<double>> features,
               std::span<const int> labels, std::span<const double> weights,
               double bias, double l2) {
  const double n = static_cast<double>(features.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double z = dot_affine(weights, features[i], bias);
    // -[y log s + (1-y) log(1-s)] = log1pexp(z) - y z
    loss += log1pexp(z) - (labels[i] ? z : 0.0);
  }
  loss /= n;
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

void lr_gradient(std::span<const std::vector<double>> features,
                 std::span<const int> labels, std::span<const double> weights,
                 double bias, double l2, std::span<double> grad_w,
                 double& grad_b) {
  const double n = static_cast<double>(features.size());
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double z = dot_affine(weights, features[i], bias);
    const double r = sigmoid(z) - static_cast<double>(labels[i]);
    for (std::size_t j = 0; j < grad_w.size(); ++j) {
      grad_w[j] += r * features[i][j];
    }
    grad_b += r;
  }
  for (std::size_t j = 0; j < grad_w.size(); ++j) {
    grad_w[j] = grad_w[j] / n + l2 * weights[j];
  }
  grad_b /= n;
}

LogisticModel lr_fit(std::span<const std::vector<double>> features,
                     std::span<const int> labels, const LrOptions& opts) {
  if (features.empty() || features.size() != labels.size()) {
    throw std::invalid_argument("lr_fit: features/labels size mismatch");
  }
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw std::invalid_argument("lr_fit: inconsistent feature dimension");
    }
  }
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("lr_fit: labels must be 0/1");
    (y ? has1 : has0) = true;
  }
  if (!has0 || !has1) {
    throw std::invalid_argument("lr_fit: need both classes in the labels");
  }

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  std::vector<double> gw(dim, 0.0), trial_w(dim, 0.0);
  double gb = 0.0;
  double loss = lr_loss(features, labels, w, b, opts.l2);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    lr_gradient(features, labels, w, b, opts.l2, gw, gb);
    double gnorm_inf = std::abs(gb);
    double gnorm_sq = gb * gb;
    for (double g : gw) {
      gnorm_inf = std::max(gnorm_inf, std::abs(g));
      gnorm_sq += g * g;
    }
    if (gnorm_inf < opts.tol) break;

    // Backtracking line search with the Armijo condition.
    double step = 1.0;
    while (true) {
      for (std::size_t j = 0; j < dim; ++j) trial_w[j] = w[j] - step * gw[j];
      const double trial_b = b - step * gb;
      const double trial_loss =
          lr_loss(features, labels, trial_w, trial_b, opts.l2);
      if (trial_loss <= loss - 1e-4 * step * gnorm_sq || step < 1e-12) {
        w.swap(trial_w);
        b = trial_b;
        loss = trial_loss;
        break;
      }
      step *= 0.5;
    }
  }

  LogisticModel m;
  m.weights = std::move(w);
  m.bias = b;
  m.l2 = opts.l2;
  m.trained = true;
  return m;
}

double lr_score_raw(const LogisticModel& m, std::span<const double> features) {
  if (!m.trained) throw std::invalid_argument("lr_score: model not trained");
  if (features.size() != m.weights.size()) {
    throw std::invalid_argument("lr_score: feature dimension " +
                                std::to_string(features.size()) +
                                " does not match model dimension " +
                                std::to_string(m.weights.size()));
  }
  return sigmoid(dot_affine(m.weights, features, m.bias));
}

double lr_score(const LogisticModel& m, const GradeDistribution& dist) {
  dist.validate();
  return lr_score_raw(m, dist.p);
}

std::string LogisticModel::to_json_string() const {
  nlohmann::json j;
  j["bias"] = bias;
  j["feature_names"] = feature_names;
  j["l2"] = l2;
  j["trained"] = trained;
  j["weights"] = weights;
  return j.dump(2) + "\n";
}

LogisticModel LogisticModel::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LogisticModel m;
  m.bias = j.at("bias").get<double>();
  m.l2 = j.at("l2").get<double>();
  m.trained = j.at("trained").get<bool>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (j.contains("feature_names")) {
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  }
  return m;
}

}  // namespace amdprog
