#pragma once

// Late-fusion convolutional scorer. Both stereo images pass through one
// shared-parameter tower (stride-2 conv blocks with ReLU, global average
// pool, linear head); the two post-softmax outputs are averaged. The math is
// templated on the scalar type: training runs in float, verification
// (finite-difference gradient checks) in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amdprog {

struct FusionNetConfig {
  int input_size = 64;
  std::vector<int> channels = {8, 16, 32};  // conv blocks, stride 2 each
  int kernel = 3;                           // odd
  int n_classes = 2;

  void validate() const {
    if (input_size < 4) throw std::invalid_argument("net input_size < 4");
    if (channels.empty()) throw std::invalid_argument("net needs >= 1 conv block");
    for (int c : channels) {
      if (c < 1) throw std::invalid_argument("conv channels must be >= 1");
    }
    if (kernel < 1 || kernel % 2 == 0) {
      throw std::invalid_argument("kernel must be odd and >= 1");
    }
    if (n_classes < 2) throw std::invalid_argument("net needs >= 2 classes");
    if (spatial_after(static_cast<int>(channels.size())) < 1) {
      throw std::invalid_argument("input too small for conv stack");
    }
  }

  // spatial side length after `layers` stride-2 convs (pad = kernel/2)
  int spatial_after(int layers) const {
    int s = input_size;
    for (int i = 0; i < layers; ++i) s = (s - 1) / 2 + 1;
    return s;
  }

  int feature_dim() const { return channels.back(); }
};

template <typename T>
struct NetParams {
  struct Conv {
    std::vector<T> w;  // [out_ch][in_ch][k][k]
    std::vector<T> b;  // [out_ch]
  };
  std::vector<Conv> convs;
  std::vector<T> head_w;  // [n_classes][feat]
  std::vector<T> head_b;  // [n_classes]

  void resize_like(const FusionNetConfig& cfg) {
    convs.resize(cfg.channels.size());
    int in_ch = 3;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
      const int out_ch = cfg.channels[i];
      convs[i].w.assign(static_cast<std::size_t>(out_ch) * in_ch * cfg.kernel *
                            cfg.kernel,
                        T(0));
      convs[i].b.assign(static_cast<std::size_t>(out_ch), T(0));
      in_ch = out_ch;
    }
    head_w.assign(static_cast<std::size_t>(cfg.n_classes) * cfg.feature_dim(),
                  T(0));
    head_b.assign(static_cast<std::size_t>(cfg.n_classes), T(0));
  }

  void fill(T value) {
    for (auto& c : convs) {
      std::fill(c.w.begin(), c.w.end(), value);
      std::fill(c.b.begin(), c.b.end(), value);
    }
    std::fill(head_w.begin(), head_w.end(), value);
    std::fill(head_b.begin(), head_b.end(), value);
  }

  std::size_t count() const {
    std::size_t n = head_w.size() + head_b.size();
    for (const auto& c : convs) n += c.w.size() + c.b.size();
    return n;
  }

  std::vector<T> flatten() const {
    std::vector<T> out;
    out.reserve(count());
    for (const auto& c : convs) {
      out.insert(out.end(), c.w.begin(), c.w.end());
      out.insert(out.end(), c.b.begin(), c.b.end());
    }
    out.insert(out.end(), head_w.begin(), head_w.end());
    out.insert(out.end(), head_b.begin(), head_b.end());
    return out;
  }

  void unflatten(std::span<const T> flat) {
    std::size_t at = 0;
    auto take = [&](std::vector<T>& dst) {
      std::copy(flat.begin() + at, flat.begin() + at + dst.size(), dst.begin());
      at += dst.size();
    };
    for (auto& c : convs) {
      take(c.w);
      take(c.b);
    }
    take(head_w);
    take(head_b);
    if (at != flat.size()) {
      throw std::invalid_argument("unflatten: size mismatch");
    }
  }

  template <typename U>
  NetParams<U> cast() const {
    NetParams<U> out;
    out.convs.resize(convs.size());
    for (std::size_t i = 0; i < convs.size(); ++i) {
      out.convs[i].w.assign(convs[i].w.begin(), convs[i].w.end());
      out.convs[i].b.assign(convs[i].b.begin(), convs[i].b.end());
    }
    out.head_w.assign(head_w.begin(), head_w.end());
    out.head_b.assign(head_b.begin(), head_b.end());
    return out;
  }
};

namespace detail {

// out[oc,oy,ox] = b[oc] + sum_{ic,ky,kx} w[oc,ic,ky,kx] * in[ic, 2oy-p+ky, 2ox-p+kx]
template <typename T>
void conv_forward(std::span<const T> in, int in_ch, int in_size,
                  std::span<const T> w, std::span<const T> b, int out_ch,
                  int k, std::span<T> out) {
  const int pad = k / 2;
  const int out_size = (in_size - 1) / 2 + 1;
  const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
  for (int oc = 0; oc < out_ch; ++oc) {
    std::fill_n(out.begin() + oc * out_plane, out_plane, b[oc]);
  }
  for (int oc = 0; oc < out_ch; ++oc) {
    T* out_base = out.data() + oc * out_plane;
    for (int ic = 0; ic < in_ch; ++ic) {
      const T* in_base =
          in.data() + static_cast<std::size_t>(ic) * in_size * in_size;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T wv =
              w[((static_cast<std::size_t>(oc) * in_ch + ic) * k + ky) * k + kx];
          const int dy = ky - pad, dx = kx - pad;
          // valid output range so that the tap stays inside the input
          const int oy_lo = dy < 0 ? (1 - dy) / 2 : 0;
          const int oy_hi = std::min(out_size, (in_size - dy + 1) / 2);
          const int ox_lo = dx < 0 ? (1 - dx) / 2 : 0;
          const int ox_hi = std::min(out_size, (in_size - dx + 1) / 2);
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const T* in_row = in_base + (2 * oy + dy) * in_size + dx;
            T* out_row = out_base + static_cast<std::size_t>(oy) * out_size;
            for (int ox = ox_lo; ox < ox_hi; ++ox) {
              out_row[ox] += wv * in_row[2 * ox];
            }
          }
        }
      }
    }
  }
}

// Gradients of conv_forward. d_out is the upstream gradient; d_in may be
// empty when the input gradient is not needed (first layer).
template <typename T>
void conv_backward(std::span<const T> in, int in_ch, int in_size,
                   std::span<const T> w, int out_ch, int k,
                   std::span<const T> d_out, std::span<T> d_w,
                   std::span<T> d_b, std::span<T> d_in) {
  const int pad = k / 2;
  const int out_size = (in_size - 1) / 2 + 1;
  const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
  for (int oc = 0; oc < out_ch; ++oc) {
    const T* dout_base = d_out.data() + oc * out_plane;
    T acc = T(0);
    for (std::size_t i = 0; i < out_plane; ++i) acc += dout_base[i];
    d_b[oc] += acc;
    for (int ic = 0; ic < in_ch; ++ic) {
      const T* in_base =
          in.data() + static_cast<std::size_t>(ic) * in_size * in_size;
      T* din_base =
          d_in.empty()
              ? nullptr
              : d_in.data() + static_cast<std::size_t>(ic) * in_size * in_size;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t w_idx =
              ((static_cast<std::size_t>(oc) * in_ch + ic) * k + ky) * k + kx;
          const T wv = w[w_idx];
          const int dy = ky - pad, dx = kx - pad;
          const int oy_lo = dy < 0 ? (1 - dy) / 2 : 0;
          const int oy_hi = std::min(out_size, (in_size - dy + 1) / 2);
          const int ox_lo = dx < 0 ? (1 - dx) / 2 : 0;
          const int ox_hi = std::min(out_size, (in_size - dx + 1) / 2);
          T dw_acc = T(0);
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const T* in_row = in_base + (2 * oy + dy) * in_size + dx;
            const T* dout_row = dout_base + static_cast<std::size_t>(oy) * out_size;
            for (int ox = ox_lo; ox < ox_hi; ++ox) {
              dw_acc += dout_row[ox] * in_row[2 * ox];
            }
            if (din_base) {
              T* din_row = din_base + (2 * oy + dy) * in_size + dx;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                din_row[2 * ox] += wv * dout_row[ox];
              }
            }
          }
          d_w[w_idx] += dw_acc;
        }
      }
    }
  }
}

template <typename T>
void softmax(std::span<const T> logits, std::span<T> probs) {
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] /= sum;
}

}  // namespace detail

// Activations recorded during a tower pass, kept for the backward pass.
template <typename T>
struct TowerTrace {
  std::vector<std::vector<T>> acts;  // acts[0] = input; acts[i+1] = post-ReLU conv i
  std::vector<T> feat;               // global average pool
  std::vector<T> logits;
  std::vector<T> probs;
};

template <typename T>
void tower_forward(const FusionNetConfig& cfg, const NetParams<T>& p,
                   std::span<const T> input, TowerTrace<T>& trace) {
  const std::size_t n_layers = cfg.channels.size();
  trace.acts.resize(n_layers + 1);
  trace.acts[0].assign(input.begin(), input.end());

  int in_ch = 3, in_size = cfg.input_size;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const int out_ch = cfg.channels[i];
    const int out_size = (in_size - 1) / 2 + 1;
    trace.acts[i + 1].assign(
        static_cast<std::size_t>(out_ch) * out_size * out_size, T(0));
    detail::conv_forward<T>(trace.acts[i], in_ch, in_size, p.convs[i].w,
                            p.convs[i].b, out_ch, cfg.kernel, trace.acts[i + 1]);
    for (T& v : trace.acts[i + 1]) v = std::max(v, T(0));  // ReLU
    in_ch = out_ch;
    in_size = out_size;
  }

  const int feat_dim = cfg.feature_dim();
  const std::size_t plane = static_cast<std::size_t>(in_size) * in_size;
  trace.feat.assign(static_cast<std::size_t>(feat_dim), T(0));
  const auto& last = trace.acts[n_layers];
  for (int c = 0; c < feat_dim; ++c) {
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) acc += last[c * plane + i];
    trace.feat[static_cast<std::size_t>(c)] = acc / static_cast<T>(plane);
  }

  trace.logits.assign(static_cast<std::size_t>(cfg.n_classes), T(0));
  for (int cls = 0; cls < cfg.n_classes; ++cls) {
    T acc = p.head_b[static_cast<std::size_t>(cls)];
    for (int c = 0; c < feat_dim; ++c) {
      acc += p.head_w[static_cast<std::size_t>(cls) * feat_dim + c] *
             trace.feat[static_cast<std::size_t>(c)];
    }
    trace.logits[static_cast<std::size_t>(cls)] = acc;
  }
  trace.probs.assign(static_cast<std::size_t>(cfg.n_classes), T(0));
  detail::softmax<T>(trace.logits, trace.probs);
}

// Backpropagates d(loss)/d(probs) through one tower, accumulating into grad.
template <typename T>
void tower_backward(const FusionNetConfig& cfg, const NetParams<T>& p,
                    const TowerTrace<T>& trace, std::span<const T> d_probs,
                    NetParams<T>& grad) {
  const int n_classes = cfg.n_classes;
  const int feat_dim = cfg.feature_dim();

  // softmax jacobian: d_logit[i] = p[i] * (d_prob[i] - sum_j d_prob[j] p[j])
  std::vector<T> d_logits(static_cast<std::size_t>(n_classes));
  T dot = T(0);
  for (int i = 0; i < n_classes; ++i) dot += d_probs[i] * trace.probs[i];
  for (int i = 0; i < n_classes; ++i) {
    d_logits[i] = trace.probs[i] * (d_probs[i] - dot);
  }

  std::vector<T> d_feat(static_cast<std::size_t>(feat_dim), T(0));
  for (int cls = 0; cls < n_classes; ++cls) {
    grad.head_b[cls] += d_logits[cls];
    for (int c = 0; c < feat_dim; ++c) {
      grad.head_w[static_cast<std::size_t>(cls) * feat_dim + c] +=
          d_logits[cls] * trace.feat[c];
      d_feat[c] += p.head_w[static_cast<std::size_t>(cls) * feat_dim + c] *
                   d_logits[cls];
    }
  }

  const std::size_t n_layers = cfg.channels.size();
  const int last_size = cfg.spatial_after(static_cast<int>(n_layers));
  const std::size_t plane = static_cast<std::size_t>(last_size) * last_size;
  std::vector<T> d_act(static_cast<std::size_t>(feat_dim) * plane);
  for (int c = 0; c < feat_dim; ++c) {
    const T v = d_feat[c] / static_cast<T>(plane);
    std::fill_n(d_act.begin() + c * plane, plane, v);
  }

  for (std::size_t i = n_layers; i-- > 0;) {
    const int in_ch = i == 0 ? 3 : cfg.channels[i - 1];
    const int in_size = cfg.spatial_after(static_cast<int>(i));
    const auto& post = trace.acts[i + 1];
    for (std::size_t j = 0; j < d_act.size(); ++j) {
      if (post[j] <= T(0)) d_act[j] = T(0);  // ReLU mask
    }
    std::vector<T> d_in;
    if (i > 0) {
      d_in.assign(static_cast<std::size_t>(in_ch) * in_size * in_size, T(0));
    }
    detail::conv_backward<T>(trace.acts[i], in_ch, in_size, p.convs[i].w,
                             cfg.channels[i], cfg.kernel, d_act,
                             grad.convs[i].w, grad.convs[i].b, d_in);
    d_act = std::move(d_in);
  }
}

// Probability vector of the fused model: mean of the two towers' softmax
// outputs. Throws std::invalid_argument on a size mismatch.
template <typename T>
std::vector<T> fused_forward(const FusionNetConfig& cfg,
                             const NetParams<T>& p, std::span<const T> left,
                             std::span<const T> right) {
  const std::size_t expect =
      static_cast<std::size_t>(3) * cfg.input_size * cfg.input_size;
  if (left.size() != expect || right.size() != expect) {
    throw std::invalid_argument("fused_forward: input tensor size mismatch");
  }
  TowerTrace<T> tl, tr;
  tower_forward(cfg, p, left, tl);
  tower_forward(cfg, p, right, tr);
  std::vector<T> probs(static_cast<std::size_t>(cfg.n_classes));
  for (int i = 0; i < cfg.n_classes; ++i) {
    probs[i] = (tl.probs[i] + tr.probs[i]) * T(0.5);
  }
  return probs;
}

template <typename T>
struct StereoTensor {
  std::vector<T> left, right;
  int cls = 0;
};

// Mean cross-entropy of the fused outputs over the batch; the exact analytic
// gradient is accumulated into `grad` (zeroed here).
template <typename T>
T fused_backward(const FusionNetConfig& cfg, const NetParams<T>& p,
                 std::span<const StereoTensor<T>> batch, NetParams<T>& grad) {
  if (batch.empty()) throw std::invalid_argument("fused_backward: empty batch");
  grad.resize_like(cfg);
  const T inv_n = T(1) / static_cast<T>(batch.size());
  T loss = T(0);
  TowerTrace<T> tl, tr;
  std::vector<T> d_probs(static_cast<std::size_t>(cfg.n_classes));
  for (const StereoTensor<T>& s : batch) {
    tower_forward(cfg, p, s.left, tl);
    tower_forward(cfg, p, s.right, tr);
    const T fused = (tl.probs[s.cls] + tr.probs[s.cls]) * T(0.5);
    loss -= std::log(std::max(fused, T(1e-30)));
    // d(mean CE)/d(tower prob[c]) = -1/(n * fused) * 0.5 for c == cls
    std::fill(d_probs.begin(), d_probs.end(), T(0));
    d_probs[s.cls] = -inv_n / fused * T(0.5);
    tower_backward(cfg, p, tl, d_probs, grad);
    tower_backward(cfg, p, tr, d_probs, grad);
  }
  return loss * inv_n;
}

}  // namespace amdprog
