#pragma once

// Training, scoring, and checkpointing of the late-fusion scorer.

#include <cstdint>
#include <filesystem>
#include <span>

#include "amdprog/fusion_net.hpp"
#include "amdprog/image.hpp"

namespace amdprog {

struct FusionNet {
  FusionNetConfig config;
  NetParams<float> params;
};

// Glorot-uniform initialization, deterministic given seed.
FusionNet make_fusion_net(const FusionNetConfig& cfg, std::uint64_t seed);

// Fused probability vector for a preprocessed stereo pair. Throws
// std::invalid_argument when the images do not match the net input size.
std::vector<float> forward(const FusionNet& net, const Image& left,
                           const Image& right);

// Positive-class probability of a binary net.
double end_to_end_score(const FusionNet& net, const Image& left,
                        const Image& right);

struct StereoSample {
  const ImageU8* left = nullptr;
  const ImageU8* right = nullptr;
  int cls = 0;
};

struct TrainOptions {
  double learning_rate = 0.01;
  int batch_size = 32;
  int patience = 5;    // tuning evaluations without improvement before stopping
  int eval_every = 1;  // epochs between tuning evaluations
  int max_epochs = 100;
  std::uint64_t seed = 0;
};

struct TrainState {
  int epochs_run = 0;
  double best_tune_metric = 0.0;
  int evals_without_improvement = 0;
  bool early_stopped = false;
  std::vector<double> tune_history;  // metric after each evaluation
};

// Mini-batch gradient descent with a fixed learning rate. After every
// eval_every epochs the tuning metric (AUC; macro one-vs-rest AUC when
// n_classes > 2) is computed unsampled; parameters are snapshotted on strict
// improvement and the best snapshot is restored on return. Stops after
// `patience` evaluations without improvement or at max_epochs.
// Throws std::invalid_argument when a set is empty or the tuning set does
// not contain at least two classes.
TrainState train(FusionNet& net, std::span<const StereoSample> train_set,
                 std::span<const StereoSample> tune_set,
                 const TrainOptions& opts);

// Tuning metric used by train(), exposed for the early-stopping tests.
double tune_metric(const FusionNet& net, std::span<const StereoSample> tune_set);

// Versioned JSON checkpoint; load(save(net)) reproduces forward outputs
// exactly. load throws std::runtime_error on corrupt or truncated files and
// std::invalid_argument when expected_classes is given and does not match.
void checkpoint_save(const FusionNet& net, const std::filesystem::path& path,
                     const std::string& provenance = "");
FusionNet checkpoint_load(const std::filesystem::path& path,
                          int expected_classes = 0);

}  // namespace amdprog
