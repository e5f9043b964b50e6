#include "amdprog/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "amdprog/dataset_io.hpp"
#include "amdprog/png_io.hpp"
#include "amdprog/predictors.hpp"
#include "amdprog/rng.hpp"

namespace amdprog {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json gen_config_to_json(const GenConfig& g) {
  json j;
  j["n_patients"] = g.n_patients;
  j["visits_min"] = g.visits_min;
  j["visits_max"] = g.visits_max;
  j["visit_spacing_days"] = g.visit_spacing_days;
  j["visit_jitter_days"] = g.visit_jitter_days;
  j["second_eye_prob"] = g.second_eye_prob;
  j["risk_power"] = g.risk_power;
  j["hazard_scale"] = g.hazard_scale;
  j["hazard_power"] = g.hazard_power;
  j["step_drift"] = g.step_drift;
  j["grade_noise"] = g.grade_noise;
  j["reversal_injection_rate"] = g.reversal_injection_rate;
  j["with_images"] = g.with_images;
  j["image_size"] = g.image_size;
  j["drusen_signal"] = g.drusen_signal;
  j["max_blobs"] = g.max_blobs;
  j["stereo_noise"] = g.stereo_noise;
  return j;
}

void gen_config_from_json(const json& j, GenConfig& g) {
  if (j.contains("n_patients")) g.n_patients = j["n_patients"].get<int>();
  if (j.contains("visits_min")) g.visits_min = j["visits_min"].get<int>();
  if (j.contains("visits_max")) g.visits_max = j["visits_max"].get<int>();
  if (j.contains("visit_spacing_days")) g.visit_spacing_days = j["visit_spacing_days"].get<int>();
  if (j.contains("visit_jitter_days")) g.visit_jitter_days = j["visit_jitter_days"].get<int>();
  if (j.contains("second_eye_prob")) g.second_eye_prob = j["second_eye_prob"].get<double>();
  if (j.contains("risk_power")) g.risk_power = j["risk_power"].get<int>();
  if (j.contains("hazard_scale")) g.hazard_scale = j["hazard_scale"].get<double>();
  if (j.contains("hazard_power")) g.hazard_power = j["hazard_power"].get<int>();
  if (j.contains("step_drift")) g.step_drift = j["step_drift"].get<double>();
  if (j.contains("grade_noise")) g.grade_noise = j["grade_noise"].get<double>();
  if (j.contains("reversal_injection_rate")) g.reversal_injection_rate = j["reversal_injection_rate"].get<double>();
  if (j.contains("with_images")) g.with_images = j["with_images"].get<bool>();
  if (j.contains("image_size")) g.image_size = j["image_size"].get<int>();
  if (j.contains("drusen_signal")) g.drusen_signal = j["drusen_signal"].get<double>();
  if (j.contains("max_blobs")) g.max_blobs = j["max_blobs"].get<int>();
  if (j.contains("stereo_noise")) g.stereo_noise = j["stereo_noise"].get<double>();
}

bool predictor_needs_images(const std::string& p) {
  return p != "manual4" && p != "manual9";
}

bool predictor_known(const std::string& p) {
  return std::find(kAllPredictors.begin(), kAllPredictors.end(), p) !=
         kAllPredictors.end();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Per-example model outputs shared by the image-based predictors.
struct ExampleScores {
  bool has_images = false;
  double e2e = 0.0;
  GradeDistribution dist4;
  GradeDistribution dist9;
};

struct FoldOutput {
  std::map<std::string, std::map<std::string, FoldCell>> cells;
  int missing_images = 0;
};

// tpr of the randomized rule at a given fpr (linear interpolation between
// the bracketing vertices), used for the fold-averaged ROC export.
double tpr_at_fpr(const RocCurve& curve, double fpr) {
  if (curve.points.empty()) return 0.0;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.points[i].fpr <= fpr) lo = i;
  }
  if (curve.points[lo].fpr == fpr || lo + 1 >= curve.points.size()) {
    return curve.points[lo].tpr;
  }
  const auto& a = curve.points[lo];
  const auto& b = curve.points[lo + 1];
  const double w = (fpr - a.fpr) / (b.fpr - a.fpr);
  return (1.0 - w) * a.tpr + w * b.tpr;
}

}  // namespace

void RunConfig::validate() const {
  horizon.validate();
  if (k < 3) throw std::invalid_argument("config: k must be >= 3");
  if (n_samples < 1) throw std::invalid_argument("config: n_samples must be >= 1");
  if (!(target_specificity > 0.0 && target_specificity < 1.0)) {
    throw std::invalid_argument("config: target_specificity must lie in (0,1)");
  }
  if (predictors.empty()) throw std::invalid_argument("config: no predictors");
  for (const std::string& p : predictors) {
    if (!predictor_known(p)) {
      throw std::invalid_argument("config: unknown predictor '" + p + "'");
    }
  }
  if (cohorts.empty()) throw std::invalid_argument("config: no cohorts");
  vision.validate();
  if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate <= 0");
  if (batch_size < 1 || patience < 1 || eval_every < 1 || max_epochs < 1) {
    throw std::invalid_argument("config: training options must be >= 1");
  }
  if (phase1_max_train < 0 || workers < 0) {
    throw std::invalid_argument("config: phase1_max_train/workers must be >= 0");
  }
}

std::string RunConfig::to_json_string() const {
  json j;
  j["data"] = data_path;
  j["images_dir"] = images_dir;
  j["out"] = out_dir;
  j["horizon"] = {{"horizon_days", horizon.horizon_days},
                  {"window_lo_days", horizon.window_lo_days},
                  {"window_hi_days", horizon.window_hi_days}};
  j["k"] = k;
  j["seeds"] = {{"fold", seeds.fold},
                {"sampling", seeds.sampling},
                {"training", seeds.training},
                {"synthesis", seeds.synthesis}};
  j["predictors"] = predictors;
  std::vector<std::string> cohort_names;
  cohort_names.reserve(cohorts.size());
  for (Cohort c : cohorts) cohort_names.push_back(to_string(c));
  j["cohorts"] = cohort_names;
  j["target_specificity"] = target_specificity;
  j["n_samples"] = n_samples;
  j["vision"] = {{"input_size", vision.input_size},
                 {"channels", vision.channels},
                 {"kernel", vision.kernel},
                 {"learning_rate", learning_rate},
                 {"batch_size", batch_size},
                 {"patience", patience},
                 {"eval_every", eval_every},
                 {"max_epochs", max_epochs}};
  j["phase1_max_train"] = phase1_max_train;
  j["workers"] = workers;
  j["synth"] = gen_config_to_json(synth);
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;
  cfg.synth = calibrated_preset();
  if (j.contains("data")) cfg.data_path = j["data"].get<std::string>();
  if (j.contains("images_dir")) cfg.images_dir = j["images_dir"].get<std::string>();
  if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
  if (j.contains("horizon")) {
    const auto& h = j["horizon"];
    if (h.contains("horizon_days")) cfg.horizon.horizon_days = h["horizon_days"].get<int>();
    if (h.contains("window_lo_days")) cfg.horizon.window_lo_days = h["window_lo_days"].get<int>();
    if (h.contains("window_hi_days")) cfg.horizon.window_hi_days = h["window_hi_days"].get<int>();
  }
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    if (s.contains("fold")) cfg.seeds.fold = s["fold"].get<std::uint64_t>();
    if (s.contains("sampling")) cfg.seeds.sampling = s["sampling"].get<std::uint64_t>();
    if (s.contains("training")) cfg.seeds.training = s["training"].get<std::uint64_t>();
    if (s.contains("synthesis")) cfg.seeds.synthesis = s["synthesis"].get<std::uint64_t>();
  }
  if (j.contains("predictors")) {
    cfg.predictors = j["predictors"].get<std::vector<std::string>>();
  }
  if (j.contains("cohorts")) {
    cfg.cohorts.clear();
    for (const auto& name : j["cohorts"]) {
      cfg.cohorts.push_back(cohort_from_string(name.get<std::string>()));
    }
  }
  if (j.contains("target_specificity")) {
    cfg.target_specificity = j["target_specificity"].get<double>();
  }
  if (j.contains("n_samples")) cfg.n_samples = j["n_samples"].get<int>();
  if (j.contains("vision")) {
    const auto& v = j["vision"];
    if (v.contains("input_size")) cfg.vision.input_size = v["input_size"].get<int>();
    if (v.contains("channels")) cfg.vision.channels = v["channels"].get<std::vector<int>>();
    if (v.contains("kernel")) cfg.vision.kernel = v["kernel"].get<int>();
    if (v.contains("learning_rate")) cfg.learning_rate = v["learning_rate"].get<double>();
    if (v.contains("batch_size")) cfg.batch_size = v["batch_size"].get<int>();
    if (v.contains("patience")) cfg.patience = v["patience"].get<int>();
    if (v.contains("eval_every")) cfg.eval_every = v["eval_every"].get<int>();
    if (v.contains("max_epochs")) cfg.max_epochs = v["max_epochs"].get<int>();
  }
  if (j.contains("phase1_max_train")) cfg.phase1_max_train = j["phase1_max_train"].get<int>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (j.contains("synth")) gen_config_from_json(j["synth"], cfg.synth);
  cfg.synth.seed = cfg.seeds.synthesis;
  cfg.vision.n_classes = 2;
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json_string())); }

const ImageU8* ImageStore::get(const std::string& relative) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(relative);
  if (it != cache_.end()) return it->second.get();
  const fs::path full = base_ / relative;
  if (!fs::exists(full)) {
    cache_.emplace(relative, nullptr);
    return nullptr;
  }
  auto img = std::make_unique<ImageU8>(read_png(full));
  const ImageU8* ptr = img.get();
  cache_.emplace(relative, std::move(img));
  return ptr;
}

namespace {

struct FoldContext {
  const RunConfig& cfg;
  const Dataset& dataset;
  const std::vector<LabeledExample>& examples;
  const FoldPlan& plan;
  ImageStore* store;
  fs::path out_dir;
  bool need_e2e;
  bool need_g4;
  bool need_g9;
  bool need_lr4;
  bool need_lr9;
};

GradeDistribution to_distribution(const std::vector<float>& probs) {
  GradeDistribution d;
  d.p.assign(probs.begin(), probs.end());
  // guard against float round-off drifting the sum outside the tolerance
  double sum = 0.0;
  for (double v : d.p) sum += v;
  if (sum > 0.0) {
    for (double& v : d.p) v /= sum;
  }
  return d;
}

FoldOutput run_fold(const FoldContext& ctx, int iter) {
  const RunConfig& cfg = ctx.cfg;
  FoldOutput out;
  const SelectedExamples sel = select(ctx.plan, iter, ctx.examples);
  const FoldRoles& roles = ctx.plan.iterations[static_cast<std::size_t>(iter)];

  const fs::path fold_dir =
      ctx.out_dir / ("fold_" + std::string(iter < 10 ? "0" : "") + std::to_string(iter));
  fs::create_directories(fold_dir);

  auto stereo_pair = [&](const std::optional<std::string>& left,
                         const std::optional<std::string>& right)
      -> std::pair<const ImageU8*, const ImageU8*> {
    if (!left || !right || ctx.store == nullptr) return {nullptr, nullptr};
    const ImageU8* l = ctx.store->get(*left);
    const ImageU8* r = ctx.store->get(*right);
    if (!l || !r) return {nullptr, nullptr};
    return {l, r};
  };

  const bool any_net = ctx.need_e2e || ctx.need_g4 || ctx.need_g9;

  // ---- train whatever the predictor list requires --------------------
  std::optional<FusionNet> net_e2e, net_g4, net_g9;
  if (any_net) {
    // visit-level sets for the grade nets, routed by patient fold
    std::vector<StereoSample> g4_train, g4_tune, g9_train, g9_tune;
    std::vector<const VisitRecord*> train_visits, tune_visits;
    if (ctx.need_g4 || ctx.need_g9) {
      for (const EyeSeries& eye : ctx.dataset.eyes()) {
        const int fold = ctx.plan.assignment.at(eye.patient_id);
        if (fold == roles.test) continue;
        for (const VisitRecord& v : eye.visits) {
          (fold == roles.tune ? tune_visits : train_visits).push_back(&v);
        }
      }
      if (cfg.phase1_max_train > 0 &&
          train_visits.size() > static_cast<std::size_t>(cfg.phase1_max_train)) {
        Rng rng(derive_seed(cfg.seeds.training, static_cast<std::uint64_t>(iter),
                            fnv1a64("phase1_subsample")));
        rng.shuffle(train_visits);
        train_visits.resize(static_cast<std::size_t>(cfg.phase1_max_train));
      }
      auto add_visit = [&](const VisitRecord* v, bool tune) {
        auto [l, r] = stereo_pair(v->left_img, v->right_img);
        if (!l) return;
        StereoSample s4{l, r, grade4_is_advanced(v->grade4)
                                  ? (v->grade4 == Grade4::Cga ? 3 : 4)
                                  : grade4_rank(v->grade4)};
        StereoSample s9{l, r, v->step12.value - 1};
        if (tune) {
          g4_tune.push_back(s4);
          g9_tune.push_back(s9);
        } else {
          g4_train.push_back(s4);
          g9_train.push_back(s9);
        }
      };
      for (const VisitRecord* v : train_visits) add_visit(v, false);
      for (const VisitRecord* v : tune_visits) add_visit(v, true);
    }

    std::vector<StereoSample> e2e_train, e2e_tune;
    if (ctx.need_e2e) {
      auto add_example = [&](const LabeledExample& ex, bool tune) {
        auto [l, r] = stereo_pair(ex.left_img, ex.right_img);
        if (!l) return;
        StereoSample s{l, r, ex.label == ProgressionLabel::Progressed ? 1 : 0};
        (tune ? e2e_tune : e2e_train).push_back(s);
      };
      for (const LabeledExample& ex : sel.train) add_example(ex, false);
      for (const LabeledExample& ex : sel.tune) add_example(ex, true);
    }

    TrainOptions topt;
    topt.learning_rate = cfg.learning_rate;
    topt.batch_size = cfg.batch_size;
    topt.patience = cfg.patience;
    topt.eval_every = cfg.eval_every;
    topt.max_epochs = cfg.max_epochs;

    auto fit = [&](const char* kind, int n_classes,
                   std::span<const StereoSample> train_set,
                   std::span<const StereoSample> tune_set) {
      if (train_set.empty() || tune_set.empty()) {
        throw std::runtime_error("fold " + std::to_string(iter) + ": no " +
                                 std::string(kind) +
                                 " training imagery available");
      }
      FusionNetConfig ncfg = cfg.vision;
      ncfg.n_classes = n_classes;
      TrainOptions o = topt;
      o.seed = derive_seed(cfg.seeds.training, static_cast<std::uint64_t>(iter),
                           fnv1a64(kind));
      FusionNet net = make_fusion_net(ncfg, o.seed);
      train(net, train_set, tune_set, o);
      checkpoint_save(net, fold_dir / (std::string(kind) + ".ckpt.json"),
                      cfg.hash());
      return net;
    };
    if (ctx.need_e2e) net_e2e = fit("end_to_end", 2, e2e_train, e2e_tune);
    if (ctx.need_g4) net_g4 = fit("grade4_net", 5, g4_train, g4_tune);
    if (ctx.need_g9) net_g9 = fit("grade9_net", 12, g9_train, g9_tune);
  }

  // ---- model outputs per example --------------------------------------
  auto score_examples = [&](std::span<const LabeledExample> exs,
                            bool count_missing) {
    std::vector<ExampleScores> scores(exs.size());
    if (!any_net) return scores;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      auto [l, r] = stereo_pair(exs[i].left_img, exs[i].right_img);
      if (!l) {
        if (count_missing) ++out.missing_images;
        continue;
      }
      scores[i].has_images = true;
      const Image left = to_float(*l), right = to_float(*r);
      if (net_e2e) scores[i].e2e = end_to_end_score(*net_e2e, left, right);
      if (net_g4) scores[i].dist4 = to_distribution(forward(*net_g4, left, right));
      if (net_g9) scores[i].dist9 = to_distribution(forward(*net_g9, left, right));
    }
    return scores;
  };

  const std::vector<ExampleScores> train_scores =
      (ctx.need_lr4 || ctx.need_lr9) ? score_examples(sel.train, false)
                                     : std::vector<ExampleScores>{};
  const std::vector<ExampleScores> tune_scores = score_examples(sel.tune, false);
  const std::vector<ExampleScores> test_scores = score_examples(sel.test, true);

  // ---- second-phase logistic models -----------------------------------
  std::optional<LogisticModel> lr4, lr9;
  auto fit_lr = [&](bool use4, const char* name) {
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    for (std::size_t i = 0; i < sel.train.size(); ++i) {
      if (!train_scores[i].has_images) continue;
      feats.push_back(use4 ? train_scores[i].dist4.p : train_scores[i].dist9.p);
      labels.push_back(sel.train[i].label == ProgressionLabel::Progressed ? 1 : 0);
    }
    LogisticModel m = lr_fit(feats, labels);
    for (std::size_t c = 0; c < feats.front().size(); ++c) {
      m.feature_names.push_back(std::string(use4 ? "grade4_p" : "step_p") +
                                std::to_string(c));
    }
    write_text_file(fold_dir / (std::string(name) + ".json"),
                    m.to_json_string());
    return m;
  };
  if (ctx.need_lr4) lr4 = fit_lr(true, "twophase_lr4");
  if (ctx.need_lr9) lr9 = fit_lr(false, "twophase_lr9");

  // ---- metric cells per (predictor, cohort) ----------------------------
  auto scored_set = [&](const std::string& pred,
                        std::span<const LabeledExample> exs,
                        const std::vector<ExampleScores>& model_out,
                        Cohort cohort) {
    std::vector<ScoredExample> scored;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      const LabeledExample& ex = exs[i];
      if (!ex.in_cohort(cohort)) continue;
      double s = 0.0;
      if (pred == "manual4") {
        s = manual_grade4_score(ex);
      } else if (pred == "manual9") {
        s = manual_step_score(ex);
      } else {
        if (!model_out[i].has_images) continue;
        if (pred == "end_to_end") {
          s = model_out[i].e2e;
        } else if (pred == "twophase_mode4") {
          s = two_phase_mode_score(model_out[i].dist4);
        } else if (pred == "twophase_mode9") {
          s = two_phase_mode_score(model_out[i].dist9);
        } else if (pred == "twophase_lr4") {
          s = lr_score(*lr4, model_out[i].dist4);
        } else if (pred == "twophase_lr9") {
          s = lr_score(*lr9, model_out[i].dist9);
        }
      }
      scored.push_back({ex.eye(), s, ex.label == ProgressionLabel::Progressed});
    }
    return scored;
  };

  for (const std::string& pred : cfg.predictors) {
    for (Cohort cohort : cfg.cohorts) {
      const auto test_scored = scored_set(pred, sel.test, test_scores, cohort);
      const auto tune_scored = scored_set(pred, sel.tune, tune_scores, cohort);
      if (test_scored.empty() || tune_scored.empty()) {
        throw std::runtime_error("fold " + std::to_string(iter) +
                                 ": no scored examples for predictor '" + pred +
                                 "' on cohort '" + to_string(cohort) + "'");
      }
      ResampleConfig rc;
      rc.n_samples = cfg.n_samples;
      rc.target_specificity = cfg.target_specificity;
      rc.seed = derive_seed(cfg.seeds.sampling, static_cast<std::uint64_t>(iter));
      const FoldMetrics fm = resampled_metrics(test_scored, tune_scored, rc);
      const QuartileRates qr = quartile_rates(test_scored, cfg.n_samples, rc.seed);

      FoldCell cell;
      cell.auc = fm.auc;
      cell.sensitivity = fm.sensitivity;
      cell.specificity = fm.specificity;
      cell.auc_skipped_draws = fm.auc_skipped_draws;
      cell.rule_skipped_draws = fm.rule_skipped_draws;
      cell.rule = fm.rule;
      cell.quartiles = qr.rates;
      cell.quartile_skipped_draws = qr.skipped_draws;
      cell.n_test_examples = test_scored.size();
      std::set<EyeKey> eyes;
      for (const ScoredExample& s : test_scored) eyes.insert(s.eye);
      cell.n_test_eyes = eyes.size();
      bool pos = false, neg = false;
      for (const ScoredExample& s : test_scored) (s.positive ? pos : neg) = true;
      if (pos && neg) cell.pooled_roc = roc_curve(test_scored);
      out.cells[pred][to_string(cohort)] = std::move(cell);
    }
  }
  return out;
}

}  // namespace

EvalResult run_evaluation(const RunConfig& cfg, const Dataset& dataset,
                          ImageStore* store) {
  cfg.validate();
  const std::vector<LabeledExample> examples = build_examples(dataset, cfg.horizon);
  if (examples.empty()) {
    throw std::runtime_error("no labeled examples could be derived from the dataset");
  }

  bool any_image_pred = false;
  for (const std::string& p : cfg.predictors) {
    any_image_pred = any_image_pred || predictor_needs_images(p);
  }
  if (any_image_pred) {
    const bool any_stereo =
        std::any_of(examples.begin(), examples.end(),
                    [](const LabeledExample& e) { return e.has_stereo(); });
    if (!any_stereo || store == nullptr) {
      for (const std::string& p : cfg.predictors) {
        if (predictor_needs_images(p)) {
          throw std::runtime_error("predictor '" + p +
                                   "' requires stereo imagery but the dataset "
                                   "carries none");
        }
      }
    }
  }

  EvalResult result;
  result.n_examples = examples.size();
  const std::vector<std::string> ids = dataset.patient_ids();
  result.plan = assign_folds(ids, cfg.k, cfg.seeds.fold);

  fs::create_directories(cfg.out_dir);

  FoldContext ctx{cfg,
                  dataset,
                  examples,
                  result.plan,
                  store,
                  fs::path(cfg.out_dir),
                  false,
                  false,
                  false,
                  false,
                  false};
  for (const std::string& p : cfg.predictors) {
    if (p == "end_to_end") ctx.need_e2e = true;
    if (p == "twophase_mode4" || p == "twophase_lr4") ctx.need_g4 = true;
    if (p == "twophase_mode9" || p == "twophase_lr9") ctx.need_g9 = true;
    if (p == "twophase_lr4") ctx.need_lr4 = true;
    if (p == "twophase_lr9") ctx.need_lr9 = true;
  }

  std::vector<FoldOutput> outputs(static_cast<std::size_t>(cfg.k));
  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, cfg.k));

  std::atomic<int> next_fold{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    while (true) {
      const int iter = next_fold.fetch_add(1);
      if (iter >= cfg.k) return;
      try {
        outputs[static_cast<std::size_t>(iter)] = run_fold(ctx, iter);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  result.missing_image_examples.resize(static_cast<std::size_t>(cfg.k), 0);
  for (int iter = 0; iter < cfg.k; ++iter) {
    FoldOutput& fo = outputs[static_cast<std::size_t>(iter)];
    result.missing_image_examples[static_cast<std::size_t>(iter)] = fo.missing_images;
    for (auto& [pred, by_cohort] : fo.cells) {
      for (auto& [cohort, cell] : by_cohort) {
        auto& folds = result.cells[pred][cohort];
        folds.resize(static_cast<std::size_t>(cfg.k));
        folds[static_cast<std::size_t>(iter)] = std::move(cell);
      }
    }
  }
  return result;
}

namespace {

json mean_std_json(const std::vector<double>& values) {
  const MeanStd ms = aggregate(values);
  return json{{"mean", ms.mean}, {"std", ms.std}};
}

}  // namespace

void write_eval_outputs(const EvalResult& result, const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const std::string hash = cfg.hash();

  write_text_file(out / "foldplan.json",
                  "// config_hash " + hash + "\n" + result.plan.to_json_string());

  json j;
  j["config_hash"] = hash;
  j["config"] = json::parse(cfg.to_json_string());
  j["n_examples"] = result.n_examples;
  j["missing_image_examples"] = result.missing_image_examples;
  json per_fold = json::object();
  json aggregate_j = json::object();
  for (const auto& [pred, by_cohort] : result.cells) {
    for (const auto& [cohort, folds] : by_cohort) {
      json rows = json::array();
      std::vector<double> aucs, sens, specs;
      std::array<std::vector<double>, 4> quartiles;
      for (std::size_t i = 0; i < folds.size(); ++i) {
        const FoldCell& c = folds[i];
        rows.push_back({{"fold", i},
                        {"auc", c.auc},
                        {"sensitivity", c.sensitivity},
                        {"specificity", c.specificity},
                        {"auc_skipped_draws", c.auc_skipped_draws},
                        {"rule_skipped_draws", c.rule_skipped_draws},
                        {"quartiles", c.quartiles},
                        {"quartile_skipped_draws", c.quartile_skipped_draws},
                        {"n_test_examples", c.n_test_examples},
                        {"n_test_eyes", c.n_test_eyes}});
        aucs.push_back(c.auc);
        sens.push_back(c.sensitivity);
        specs.push_back(c.specificity);
        for (std::size_t q = 0; q < 4; ++q) quartiles[q].push_back(c.quartiles[q]);
      }
      per_fold[pred][cohort] = rows;
      json agg;
      agg["auc"] = mean_std_json(aucs);
      agg["sensitivity"] = mean_std_json(sens);
      agg["specificity"] = mean_std_json(specs);
      json qj = json::array();
      for (std::size_t q = 0; q < 4; ++q) qj.push_back(mean_std_json(quartiles[q]));
      agg["quartiles"] = qj;
      aggregate_j[pred][cohort] = agg;
    }
  }
  j["per_fold"] = per_fold;
  j["aggregate"] = aggregate_j;
  write_text_file(out / "metrics.json", j.dump(2) + "\n");

  // ROC and quartile CSVs per (predictor, cohort)
  for (const auto& [pred, by_cohort] : result.cells) {
    for (const auto& [cohort, folds] : by_cohort) {
      {
        std::ostringstream csv;
        csv << "# config_hash " << hash << "\n";
        csv << "fold,fpr,tpr,threshold\n";
        for (std::size_t i = 0; i < folds.size(); ++i) {
          const RocCurve& curve = folds[i].pooled_roc;
          for (std::size_t p = 0; p < curve.points.size(); ++p) {
            csv << i << ',' << curve.points[p].fpr << ',' << curve.points[p].tpr
                << ',';
            if (p == 0) {
              csv << "inf";
            } else {
              csv << curve.thresholds[p - 1];
            }
            csv << '\n';
          }
        }
        for (int g = 0; g <= 100; ++g) {
          const double fpr = static_cast<double>(g) / 100.0;
          double tpr_sum = 0.0;
          std::size_t n = 0;
          for (const FoldCell& c : folds) {
            if (c.pooled_roc.points.empty()) continue;
            tpr_sum += tpr_at_fpr(c.pooled_roc, fpr);
            ++n;
          }
          csv << "avg," << fpr << ',' << (n ? tpr_sum / static_cast<double>(n) : 0.0)
              << ",\n";
        }
        write_text_file(out / ("roc_" + pred + "_" + cohort + ".csv"), csv.str());
      }
      {
        std::ostringstream csv;
        csv << "# config_hash " << hash << "\n";
        csv << "fold,q1,q2,q3,q4\n";
        std::array<std::vector<double>, 4> cols;
        for (std::size_t i = 0; i < folds.size(); ++i) {
          csv << i;
          for (std::size_t q = 0; q < 4; ++q) {
            csv << ',' << folds[i].quartiles[q];
            cols[q].push_back(folds[i].quartiles[q]);
          }
          csv << '\n';
        }
        csv << "mean";
        for (std::size_t q = 0; q < 4; ++q) csv << ',' << aggregate(cols[q]).mean;
        csv << "\nstd";
        for (std::size_t q = 0; q < 4; ++q) csv << ',' << aggregate(cols[q]).std;
        csv << '\n';
        write_text_file(out / ("quartiles_" + pred + "_" + cohort + ".csv"),
                        csv.str());
      }
    }
  }
}

void cmd_synth(const RunConfig& cfg) {
  GenConfig g = cfg.synth;
  g.seed = cfg.seeds.synthesis;
  g.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  SyntheticCohort cohort = generate(g);
  if (g.reversal_injection_rate > 0.0) {
    cohort.dataset = inject_reversals(
        cohort.dataset, cohort.truth, g.reversal_injection_rate,
        derive_seed(g.seed, fnv1a64("reversals")));
  }
  export_jsonl(cohort.dataset, out / "dataset.jsonl");
  write_text_file(out / "ground_truth.jsonl", cohort.truth.to_jsonl_string());
  json manifest;
  manifest["config_hash"] = cfg.hash();
  manifest["config"] = json::parse(cfg.to_json_string());
  manifest["n_patients"] = cohort.truth.n_patients;
  manifest["n_eyes"] = cohort.truth.n_eyes;
  manifest["n_visits"] = cohort.truth.n_visits;
  manifest["n_converted_eyes"] = cohort.truth.n_converted_eyes;
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");

  if (g.with_images) {
    fs::create_directories(out / "images");
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cohort.truth.eyes.size()) return;
        try {
          const EyeTruth& eye = cohort.truth.eyes[i];
          const EyeSeries& series = cohort.dataset.eyes()[i];
          for (std::size_t v = 0; v < series.visits.size(); ++v) {
            auto [left, right] = render_visit(eye, v, g);
            write_png(quantize(left), out / *series.visits[v].left_img);
            write_png(quantize(right), out / *series.visits[v].right_img);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    int workers = cfg.workers > 0
                      ? cfg.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, workers);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
  }
}

void cmd_ingest(const RunConfig& cfg, std::string& summary_json_out) {
  const Dataset ds = ingest(cfg.data_path);
  const SummaryStats s = summary(ds);
  json j;
  j["n_patients"] = s.n_patients;
  j["n_eyes"] = s.n_eyes;
  j["n_visits"] = s.n_visits;
  json g4 = json::object();
  for (std::size_t i = 0; i < s.grade4_hist.size(); ++i) {
    g4[to_string(static_cast<Grade4>(i))] = s.grade4_hist[i];
  }
  j["grade4_hist"] = g4;
  json steps = json::object();
  for (std::size_t i = 0; i < s.step_hist.size(); ++i) {
    steps[std::to_string(i + 1)] = s.step_hist[i];
  }
  j["step_hist"] = steps;
  j["median_visits_per_eye"] = s.median_visits_per_eye;
  summary_json_out = j.dump(2) + "\n";
}

void cmd_labels(const RunConfig& cfg) {
  const Dataset ds = ingest(cfg.data_path);
  const auto examples = build_examples(ds, cfg.horizon);
  fs::create_directories(cfg.out_dir);
  write_text_file(fs::path(cfg.out_dir) / "labels.jsonl",
                  labels_to_jsonl_string(examples));
}

void cmd_split(const RunConfig& cfg) {
  const Dataset ds = ingest(cfg.data_path);
  const auto ids = ds.patient_ids();
  const FoldPlan plan = assign_folds(ids, cfg.k, cfg.seeds.fold);
  fs::create_directories(cfg.out_dir);
  write_text_file(fs::path(cfg.out_dir) / "foldplan.json",
                  plan.to_json_string());
}

EvalResult cmd_evaluate(const RunConfig& cfg) {
  const Dataset ds = ingest(cfg.data_path);
  const fs::path base = cfg.images_dir.empty()
                            ? fs::path(cfg.data_path).parent_path()
                            : fs::path(cfg.images_dir);
  ImageStore store(base);
  EvalResult result = run_evaluation(cfg, ds, &store);
  write_eval_outputs(result, cfg);
  return result;
}

std::string labels_to_jsonl_string(std::span<const LabeledExample> examples) {
  std::string out;
  for (const LabeledExample& ex : examples) {
    json j;
    j["patient_id"] = ex.patient_id;
    j["eye"] = to_string(ex.laterality);
    j["day"] = ex.visit_day;
    j["grade4"] = to_string(ex.grade4);
    j["step"] = ex.step12.value;
    j["label"] = to_string(ex.label);
    j["in_none_early_iamd"] = ex.in_none_early_iamd;
    j["in_iamd"] = ex.in_iamd;
    if (ex.left_img) j["left_img"] = *ex.left_img;
    if (ex.right_img) j["right_img"] = *ex.right_img;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace amdprog
