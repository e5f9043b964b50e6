#pragma once

// Pipeline orchestration: synthesize or ingest a cohort, derive labels,
// split by patient, train whatever the selected predictors need, and emit
// the metrics report grid. Every stochastic step is driven by a named seed
// from the run configuration, so identical configurations produce
// byte-identical outputs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "amdprog/cohort.hpp"
#include "amdprog/folds.hpp"
#include "amdprog/fusion_net.hpp"
#include "amdprog/image.hpp"
#include "amdprog/labeling.hpp"
#include "amdprog/metrics.hpp"
#include "amdprog/synthgen.hpp"
#include "amdprog/vision.hpp"

namespace amdprog {

inline const std::vector<std::string> kAllPredictors = {
    "manual4",        "manual9",        "twophase_mode4", "twophase_mode9",
    "twophase_lr4",   "twophase_lr9",   "end_to_end"};

struct SeedPack {
  std::uint64_t fold = 1;
  std::uint64_t sampling = 2;
  std::uint64_t training = 3;
  std::uint64_t synthesis = 4;
};

struct RunConfig {
  std::string data_path;
  std::string images_dir;  // defaults to the data file's directory
  std::string out_dir = "out";
  HorizonConfig horizon;
  int k = 10;
  SeedPack seeds;
  std::vector<std::string> predictors = kAllPredictors;
  std::vector<Cohort> cohorts = {Cohort::NoneEarlyIntermediate,
                                 Cohort::IntermediateOnly};
  double target_specificity = 0.80;
  int n_samples = 100;

  FusionNetConfig vision;  // n_classes is set per net kind at training time
  double learning_rate = 0.01;
  int batch_size = 32;
  int patience = 5;
  int eval_every = 1;
  int max_epochs = 30;
  // optional deterministic cap on grade-net training visits (0 = no cap)
  int phase1_max_train = 0;

  int workers = 0;  // 0 = hardware concurrency
  GenConfig synth;

  void validate() const;
  std::string to_json_string() const;  // canonical: all fields materialized
  static RunConfig from_json_string(const std::string& text);
  static RunConfig from_json_file(const std::filesystem::path& path);
  std::string hash() const;  // FNV-1a of the canonical form, hex
};

// Lazily loads PNGs named by dataset image references (relative to a base
// directory) and keeps them decoded. Thread-safe.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path base) : base_(std::move(base)) {}

  // nullptr when the file does not exist; throws on undecodable files.
  const ImageU8* get(const std::string& relative);

  const std::filesystem::path& base() const { return base_; }

 private:
  std::filesystem::path base_;
  std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<ImageU8>> cache_;
};

struct FoldCell {
  double auc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  int auc_skipped_draws = 0;
  int rule_skipped_draws = 0;
  std::array<double, 4> quartiles{};
  int quartile_skipped_draws = 0;
  OperatingRule rule;
  RocCurve pooled_roc;  // unsampled ROC over the whole test fold
  std::size_t n_test_examples = 0;
  std::size_t n_test_eyes = 0;
};

struct EvalResult {
  FoldPlan plan;
  // predictor -> cohort name -> one cell per fold
  std::map<std::string, std::map<std::string, std::vector<FoldCell>>> cells;
  std::vector<int> missing_image_examples;  // per fold
  std::size_t n_examples = 0;
};

// Runs the full k-iteration cross-validation loop. `store` may be null when
// no image-based predictor is requested.
EvalResult run_evaluation(const RunConfig& cfg, const Dataset& dataset,
                          ImageStore* store);

// Serializes an EvalResult to out_dir: metrics.json, foldplan.json, and one
// roc_/quartiles_ CSV pair per (predictor, cohort).
void write_eval_outputs(const EvalResult& result, const RunConfig& cfg);

// Subcommand bodies (shared between the CLI and the test suites).
void cmd_synth(const RunConfig& cfg);
void cmd_ingest(const RunConfig& cfg, std::string& summary_json_out);
void cmd_labels(const RunConfig& cfg);
void cmd_split(const RunConfig& cfg);
EvalResult cmd_evaluate(const RunConfig& cfg);
void cmd_report(const std::filesystem::path& results_dir);

// Labeled examples as an auditable JSONL export.
std::string labels_to_jsonl_string(std::span<const LabeledExample> examples);

}  // namespace amdprog
