// Command-line front end: synth | ingest | labels | split | evaluate | report.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "amdprog/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data;
  std::string out;
  std::string images_dir;
  int k = 0;
  std::optional<std::uint64_t> seed_fold, seed_sampling, seed_training,
      seed_synthesis;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration file");
  cmd->add_option("--data", args.data, "record file (JSONL or CSV)");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--images-dir", args.images_dir,
                  "base directory for image references");
  cmd->add_option("--k", args.k, "number of folds");
  cmd->add_option("--seed-fold", args.seed_fold, "fold assignment seed");
  cmd->add_option("--seed-sampling", args.seed_sampling,
                  "visit resampling seed");
  cmd->add_option("--seed-training", args.seed_training, "model training seed");
  cmd->add_option("--seed-synthesis", args.seed_synthesis,
                  "cohort synthesis seed");
}

amdprog::RunConfig load_config(const CommonArgs& args) {
  amdprog::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = amdprog::RunConfig::from_json_file(args.config_path);
  } else {
    cfg.synth = amdprog::calibrated_preset();
  }
  if (!args.data.empty()) cfg.data_path = args.data;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (!args.images_dir.empty()) cfg.images_dir = args.images_dir;
  if (args.k > 0) cfg.k = args.k;
  if (args.seed_fold) cfg.seeds.fold = *args.seed_fold;
  if (args.seed_sampling) cfg.seeds.sampling = *args.seed_sampling;
  if (args.seed_training) cfg.seeds.training = *args.seed_training;
  if (args.seed_synthesis) {
    cfg.seeds.synthesis = *args.seed_synthesis;
    cfg.synth.seed = *args.seed_synthesis;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1-year AMD progression prognosis workbench"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string results_dir;

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic cohort (JSONL + ground truth + images)");
  CLI::App* ingest = app.add_subcommand(
      "ingest", "validate a record file and print summary statistics");
  CLI::App* labels = app.add_subcommand(
      "labels", "derive 1-year progression labels and export them as JSONL");
  CLI::App* split = app.add_subcommand(
      "split", "assign patient-exclusive folds and write the fold plan");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "run the cross-validated predictor grid and write metrics");
  CLI::App* report = app.add_subcommand(
      "report", "render tables and plot-ready CSVs from evaluation outputs");
  for (CLI::App* cmd : {synth, ingest, labels, split, evaluate}) {
    add_common(cmd, args);
  }
  report->add_option("results", results_dir, "evaluation output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      amdprog::cmd_synth(load_config(args));
    } else if (ingest->parsed()) {
      std::string summary;
      amdprog::cmd_ingest(load_config(args), summary);
      std::cout << summary;
    } else if (labels->parsed()) {
      amdprog::cmd_labels(load_config(args));
    } else if (split->parsed()) {
      amdprog::cmd_split(load_config(args));
    } else if (evaluate->parsed()) {
      amdprog::cmd_evaluate(load_config(args));
    } else if (report->parsed()) {
      amdprog::cmd_report(results_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
