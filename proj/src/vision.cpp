#include "amdprog/vision.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "amdprog/metrics.hpp"
#include "amdprog/rng.hpp"

namespace amdprog {

namespace {

constexpr int kCheckpointVersion = 1;

std::vector<float> to_tensor(const ImageU8& img, int expect_size) {
  if (img.width != expect_size || img.height != expect_size) {
    throw std::invalid_argument(
        "image size " + std::to_string(img.width) + "x" +
        std::to_string(img.height) + " does not match net input " +
        std::to_string(expect_size));
  }
  std::vector<float> t(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    t[i] = static_cast<float>(img.data[i]) * (1.0f / 255.0f);
  }
  return t;
}

std::vector<float> image_tensor(const Image& img, int expect_size) {
  if (img.width != expect_size || img.height != expect_size) {
    throw std::invalid_argument(
        "image size " + std::to_string(img.width) + "x" +
        std::to_string(img.height) + " does not match net input " +
        std::to_string(expect_size));
  }
  return img.data;
}

// Macro one-vs-rest AUC over the classes present; equals plain AUC for a
// binary head.
double macro_ovr_auc(const std::vector<std::vector<float>>& probs,
                     const std::vector<int>& labels, int n_classes) {
  double sum = 0.0;
  int used = 0;
  for (int cls = 0; cls < n_classes; ++cls) {
    std::vector<ScoredExample> scored;
    scored.reserve(labels.size());
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool is_pos = labels[i] == cls;
      (is_pos ? pos : neg) = true;
      scored.push_back({{std::to_string(i), Laterality::OD},
                        static_cast<double>(probs[i][static_cast<std::size_t>(cls)]),
                        is_pos});
    }
    if (!pos || !neg) continue;
    sum += auc(roc_curve(scored));
    ++used;
  }
  return used ? sum / used : 0.0;
}

}  // namespace

FusionNet make_fusion_net(const FusionNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  FusionNet net;
  net.config = cfg;
  net.params.resize_like(cfg);
  Rng rng(derive_seed(seed, fnv1a64("init")));
  auto glorot = [&](std::vector<float>& w, std::size_t fan_in,
                    std::size_t fan_out) {
    const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    for (float& v : w) v = (2.0f * rng.uniform_float() - 1.0f) * a;
  };
  int in_ch = 3;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const std::size_t fan =
        static_cast<std::size_t>(in_ch) * cfg.kernel * cfg.kernel;
    glorot(net.params.convs[i].w, fan,
           static_cast<std::size_t>(cfg.channels[i]) * cfg.kernel * cfg.kernel);
    in_ch = cfg.channels[i];
  }
  glorot(net.params.head_w, static_cast<std::size_t>(cfg.feature_dim()),
         static_cast<std::size_t>(cfg.n_classes));
  return net;
}

std::vector<float> forward(const FusionNet& net, const Image& left,
                           const Image& right) {
  return fused_forward<float>(net.config, net.params,
                              image_tensor(left, net.config.input_size),
                              image_tensor(right, net.config.input_size));
}

double end_to_end_score(const FusionNet& net, const Image& left,
                        const Image& right) {
  if (net.config.n_classes != 2) {
    throw std::invalid_argument(
        "end_to_end_score: net has " + std::to_string(net.config.n_classes) +
        " classes, expected a binary head");
  }
  return static_cast<double>(forward(net, left, right)[1]);
}

double tune_metric(const FusionNet& net, std::span<const StereoSample> tune_set) {
  std::vector<std::vector<float>> probs;
  std::vector<int> labels;
  probs.reserve(tune_set.size());
  labels.reserve(tune_set.size());
  for (const StereoSample& s : tune_set) {
    probs.push_back(fused_forward<float>(
        net.config, net.params, to_tensor(*s.left, net.config.input_size),
        to_tensor(*s.right, net.config.input_size)));
    labels.push_back(s.cls);
  }
  return macro_ovr_auc(probs, labels, net.config.n_classes);
}

TrainState train(FusionNet& net, std::span<const StereoSample> train_set,
                 std::span<const StereoSample> tune_set,
                 const TrainOptions& opts) {
  net.config.validate();
  if (train_set.empty() || tune_set.empty()) {
    throw std::invalid_argument("train: empty train or tune set");
  }
  std::set<int> tune_classes;
  for (const StereoSample& s : tune_set) {
    if (s.cls < 0 || s.cls >= net.config.n_classes) {
      throw std::invalid_argument("train: class label out of range");
    }
    tune_classes.insert(s.cls);
  }
  if (tune_classes.size() < 2) {
    throw std::invalid_argument(
        "train: tuning set must contain at least two classes");
  }
  for (const StereoSample& s : train_set) {
    if (s.cls < 0 || s.cls >= net.config.n_classes) {
      throw std::invalid_argument("train: class label out of range");
    }
  }

  TrainState state;
  NetParams<float> best = net.params;
  state.best_tune_metric = tune_metric(net, tune_set);
  state.tune_history.push_back(state.best_tune_metric);

  Rng shuffle_rng(derive_seed(opts.seed, fnv1a64("shuffle")));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  NetParams<float> grad;
  std::vector<StereoTensor<float>> batch;
  const float lr = static_cast<float>(opts.learning_rate);

  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const StereoSample& s = train_set[order[i]];
        batch.push_back({to_tensor(*s.left, net.config.input_size),
                         to_tensor(*s.right, net.config.input_size), s.cls});
      }
      fused_backward<float>(net.config, net.params, batch, grad);
      for (std::size_t l = 0; l < net.params.convs.size(); ++l) {
        auto& pw = net.params.convs[l].w;
        auto& pb = net.params.convs[l].b;
        for (std::size_t i = 0; i < pw.size(); ++i) pw[i] -= lr * grad.convs[l].w[i];
        for (std::size_t i = 0; i < pb.size(); ++i) pb[i] -= lr * grad.convs[l].b[i];
      }
      for (std::size_t i = 0; i < net.params.head_w.size(); ++i) {
        net.params.head_w[i] -= lr * grad.head_w[i];
      }
      for (std::size_t i = 0; i < net.params.head_b.size(); ++i) {
        net.params.head_b[i] -= lr * grad.head_b[i];
      }
    }
    state.epochs_run = epoch + 1;
    if ((epoch + 1) % opts.eval_every != 0) continue;

    const double metric = tune_metric(net, tune_set);
    state.tune_history.push_back(metric);
    if (metric > state.best_tune_metric) {
      state.best_tune_metric = metric;
      best = net.params;
      state.evals_without_improvement = 0;
    } else {
      ++state.evals_without_improvement;
      if (state.evals_without_improvement >= opts.patience) {
        state.early_stopped = true;
        break;
      }
    }
  }
  net.params = std::move(best);
  return state;
}

void checkpoint_save(const FusionNet& net, const std::filesystem::path& path,
                     const std::string& provenance) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "fusion_net";
  if (!provenance.empty()) j["config_hash"] = provenance;
  j["net"] = {{"input_size", net.config.input_size},
              {"channels", net.config.channels},
              {"kernel", net.config.kernel},
              {"n_classes", net.config.n_classes}};
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : net.params.convs) {
    convs.push_back({{"w", c.w}, {"b", c.b}});
  }
  j["params"] = {{"convs", convs},
                 {"head_w", net.params.head_w},
                 {"head_b", net.params.head_b}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

FusionNet checkpoint_load(const std::filesystem::path& path,
                          int expected_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " +
                             e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error(
          "unsupported checkpoint version " +
          std::to_string(j.at("format_version").get<int>()));
    }
    FusionNetConfig cfg;
    const auto& n = j.at("net");
    cfg.input_size = n.at("input_size").get<int>();
    cfg.channels = n.at("channels").get<std::vector<int>>();
    cfg.kernel = n.at("kernel").get<int>();
    cfg.n_classes = n.at("n_classes").get<int>();
    cfg.validate();
    if (expected_classes > 0 && cfg.n_classes != expected_classes) {
      throw std::invalid_argument(
          "checkpoint " + path.string() + " has a " +
          std::to_string(cfg.n_classes) + "-class head, expected " +
          std::to_string(expected_classes));
    }
    FusionNet net;
    net.config = cfg;
    net.params.resize_like(cfg);
    const auto& p = j.at("params");
    const auto& convs = p.at("convs");
    if (convs.size() != net.params.convs.size()) {
      throw std::runtime_error("checkpoint conv count mismatch");
    }
    for (std::size_t i = 0; i < net.params.convs.size(); ++i) {
      auto w = convs[i].at("w").get<std::vector<float>>();
      auto b = convs[i].at("b").get<std::vector<float>>();
      if (w.size() != net.params.convs[i].w.size() ||
          b.size() != net.params.convs[i].b.size()) {
        throw std::runtime_error("checkpoint conv shape mismatch at layer " +
                                 std::to_string(i));
      }
      net.params.convs[i].w = std::move(w);
      net.params.convs[i].b = std::move(b);
    }
    auto hw = p.at("head_w").get<std::vector<float>>();
    auto hb = p.at("head_b").get<std::vector<float>>();
    if (hw.size() != net.params.head_w.size() ||
        hb.size() != net.params.head_b.size()) {
      throw std::runtime_error("checkpoint head shape mismatch");
    }
    net.params.head_w = std::move(hw);
    net.params.head_b = std::move(hb);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " +
                             e.what());
  }
}

}  // namespace amdprog
