#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maculab/image.hpp"
#include "maculab/parallel.hpp"
#include "maculab/rng.hpp"

namespace maculab {

/// One convolution block: conv (zero padding (kernel-1)/2) -> rectifier ->
/// 2x2 max pool.
struct ConvBlockSpec {
  int out_channels = 8;
  int kernel = 3;
  int stride = 1;
};

struct NetworkConfig {
  int input_size = 64;
  std::vector<ConvBlockSpec> blocks = {{8, 3, 2}, {16, 3, 1}, {32, 3, 1}};
  bool global_average_pool = false;
  double dropout_keep_prob = 0.8;
  int heads = 3;

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("NetworkConfig: at least one block");
    if (!(dropout_keep_prob > 0.0 && dropout_keep_prob <= 1.0))
      throw std::invalid_argument("NetworkConfig: dropout_keep_prob must be in (0,1]");
    if (heads != 3) throw std::invalid_argument("NetworkConfig: heads must be 3");
    if (input_size < 4) throw std::invalid_argument("NetworkConfig: input_size must be >= 4");
    for (const auto& b : blocks)
      if (b.out_channels < 1 || b.kernel < 1 || b.stride < 1)
        throw std::invalid_argument("NetworkConfig: bad block spec");
  }
};

/// Sigmoid confidences of the three heads, strictly inside (0, 1).
struct PredictionTriple {
  double cidme_confidence = 0.5;
  double srf_confidence = 0.5;
  double irf_confidence = 0.5;

  double head(int i) const {
    return i == 0 ? cidme_confidence : (i == 1 ? srf_confidence : irf_confidence);
  }
};

/// Per-head training targets; an absent head contributes nothing to loss or
/// gradient (the secondary-style dataset lacks the fluid labels).
struct HeadLabels {
  std::optional<float> cidme;
  std::optional<float> srf;
  std::optional<float> irf;

  std::optional<float> head(int i) const { return i == 0 ? cidme : (i == 1 ? srf : irf); }
  bool any() const { return cidme || srf || irf; }
};

template <typename T>
struct NetParams {
  struct Conv {
    std::vector<T> w;  // [out][ky][kx][in]
    std::vector<T> b;  // [out]
  };
  std::vector<Conv> conv;
  std::vector<T> head_w;  // [heads][features]
  std::vector<T> head_b;  // [heads]
};

template <typename T>
struct ArrayRef {
  std::string name;
  std::vector<T>* v;
  bool is_weight;  // false for biases (excluded from weight decay)
};

template <typename T>
std::vector<ArrayRef<T>> array_refs(NetParams<T>& p) {
  std::vector<ArrayRef<T>> out;
  for (size_t i = 0; i < p.conv.size(); ++i) {
    out.push_back({"conv" + std::to_string(i + 1) + ".w", &p.conv[i].w, true});
    out.push_back({"conv" + std::to_string(i + 1) + ".b", &p.conv[i].b, false});
  }
  out.push_back({"head.w", &p.head_w, true});
  out.push_back({"head.b", &p.head_b, false});
  return out;
}

template <typename T>
struct ConstArrayRef {
  std::string name;
  const std::vector<T>* v;
  bool is_weight;
};

template <typename T>
std::vector<ConstArrayRef<T>> array_refs(const NetParams<T>& p) {
  std::vector<ConstArrayRef<T>> out;
  for (size_t i = 0; i < p.conv.size(); ++i) {
    out.push_back({"conv" + std::to_string(i + 1) + ".w", &p.conv[i].w, true});
    out.push_back({"conv" + std::to_string(i + 1) + ".b", &p.conv[i].b, false});
  }
  out.push_back({"head.w", &p.head_w, true});
  out.push_back({"head.b", &p.head_b, false});
  return out;
}

/// Resolved spatial dimensions of every stage; rejects configs that collapse
/// a map to zero pixels.
struct NetGeometry {
  struct Block {
    int in_h, in_w, in_c;
    int conv_h, conv_w;  // after conv (== relu dims)
    int out_h, out_w;    // after 2x2 pool
    int out_c, kernel, stride, pad;
  };
  std::vector<Block> blocks;
  int feature_count = 0;

  static NetGeometry resolve(const NetworkConfig& cfg) {
    cfg.validate();
    NetGeometry g;
    int h = cfg.input_size, w = cfg.input_size, c = ImageTensor::kChannels;
    for (const auto& spec : cfg.blocks) {
      Block b;
      b.in_h = h;
      b.in_w = w;
      b.in_c = c;
      b.kernel = spec.kernel;
      b.stride = spec.stride;
      b.pad = (spec.kernel - 1) / 2;
      b.conv_h = (h + 2 * b.pad - spec.kernel) / spec.stride + 1;
      b.conv_w = (w + 2 * b.pad - spec.kernel) / spec.stride + 1;
      b.out_h = b.conv_h / 2;
      b.out_w = b.conv_w / 2;
      b.out_c = spec.out_channels;
      if (b.conv_h < 1 || b.conv_w < 1 || b.out_h < 1 || b.out_w < 1)
        throw std::invalid_argument("NetworkConfig: a block collapses the feature map");
      g.blocks.push_back(b);
      h = b.out_h;
      w = b.out_w;
      c = b.out_c;
    }
    g.feature_count = cfg.global_average_pool ? c : h * w * c;
    return g;
  }
};

template <typename T>
NetParams<T> init_params(const NetworkConfig& cfg, uint64_t seed) {
  const NetGeometry geom = NetGeometry::resolve(cfg);
  Rng rng(seed);
  NetParams<T> p;
  for (const auto& b : geom.blocks) {
    typename NetParams<T>::Conv conv;
    const size_t n = static_cast<size_t>(b.out_c) * b.kernel * b.kernel * b.in_c;
    const double fan_in = static_cast<double>(b.kernel) * b.kernel * b.in_c;
    const double bound = std::sqrt(6.0 / fan_in);
    conv.w.resize(n);
    for (auto& v : conv.w) v = static_cast<T>(rng.uniform(-bound, bound));
    conv.b.assign(static_cast<size_t>(b.out_c), T(0));
    p.conv.push_back(std::move(conv));
  }
  const double bound = std::sqrt(6.0 / geom.feature_count);
  p.head_w.resize(static_cast<size_t>(cfg.heads) * geom.feature_count);
  for (auto& v : p.head_w) v = static_cast<T>(rng.uniform(-bound, bound));
  p.head_b.assign(static_cast<size_t>(cfg.heads), T(0));
  return p;
}

template <typename T>
NetParams<T> zeros_like(const NetParams<T>& p) {
  NetParams<T> out;
  for (const auto& c : p.conv)
    out.conv.push_back({std::vector<T>(c.w.size(), T(0)), std::vector<T>(c.b.size(), T(0))});
  out.head_w.assign(p.head_w.size(), T(0));
  out.head_b.assign(p.head_b.size(), T(0));
  return out;
}

template <typename T>
double sigmoid(T z) {
  const double zd = static_cast<double>(z);
  if (zd >= 0) return 1.0 / (1.0 + std::exp(-zd));
  const double e = std::exp(zd);
  return e / (1.0 + e);
}

/// Per-image activations kept for the backward pass.
template <typename T>
struct ImageCache {
  std::vector<std::vector<T>> block_in;    // input of each block, HWC
  std::vector<std::vector<T>> conv_pre;    // pre-rectifier conv output
  std::vector<std::vector<T>> pooled;      // post-pool output
  std::vector<std::vector<int>> pool_arg;  // winner index into the conv map
  std::vector<T> features;                 // flatten or GAP, before dropout
  std::vector<T> dropout_mask;             // 0 or 1/keep; empty in eval mode
  std::vector<T> logits;                   // [heads]
};

namespace detail {

template <typename T>
void conv_forward(const NetGeometry::Block& g, const std::vector<T>& in, const std::vector<T>& w,
                  const std::vector<T>& b, std::vector<T>& out) {
  out.assign(static_cast<size_t>(g.conv_h) * g.conv_w * g.out_c, T(0));
  const int k = g.kernel, pad = g.pad, stride = g.stride;
  for (int oy = 0; oy < g.conv_h; ++oy) {
    for (int ox = 0; ox < g.conv_w; ++ox) {
      T* out_px = &out[(static_cast<size_t>(oy) * g.conv_w + ox) * g.out_c];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= g.in_w) continue;
          const T* in_px = &in[(static_cast<size_t>(iy) * g.in_w + ix) * g.in_c];
          for (int o = 0; o < g.out_c; ++o) {
            const T* wk = &w[((static_cast<size_t>(o) * k + ky) * k + kx) * g.in_c];
            T acc = T(0);
            for (int i = 0; i < g.in_c; ++i) acc += wk[i] * in_px[i];
            out_px[o] += acc;
          }
        }
      }
      for (int o = 0; o < g.out_c; ++o) out_px[o] += b[o];
    }
  }
}

template <typename T>
void conv_backward(const NetGeometry::Block& g, const std::vector<T>& in,
                   const std::vector<T>& w, const std::vector<T>& dout, std::vector<T>& din,
                   std::vector<T>& dw, std::vector<T>& db) {
  din.assign(in.size(), T(0));
  const int k = g.kernel, pad = g.pad, stride = g.stride;
  for (int oy = 0; oy < g.conv_h; ++oy) {
    for (int ox = 0; ox < g.conv_w; ++ox) {
      const T* dout_px = &dout[(static_cast<size_t>(oy) * g.conv_w + ox) * g.out_c];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= g.in_w) continue;
          const size_t in_off = (static_cast<size_t>(iy) * g.in_w + ix) * g.in_c;
          for (int o = 0; o < g.out_c; ++o) {
            const T d = dout_px[o];
            if (d == T(0)) continue;
            const size_t w_off = ((static_cast<size_t>(o) * k + ky) * k + kx) * g.in_c;
            for (int i = 0; i < g.in_c; ++i) {
              dw[w_off + i] += d * in[in_off + i];
              din[in_off + i] += d * w[w_off + i];
            }
          }
        }
      }
      for (int o = 0; o < g.out_c; ++o) db[o] += dout_px[o];
    }
  }
}

}  // namespace detail

/// Forward pass for one image. rng drives the dropout mask and is consumed
/// only in train mode.
template <typename T>
ImageCache<T> forward_image(const NetworkConfig& cfg, const NetGeometry& geom,
                            const NetParams<T>& params, const ImageTensor& image,
                            bool train_mode, Rng* rng, bool keep_cache) {
  if (image.height != cfg.input_size || image.width != cfg.input_size)
    throw std::invalid_argument("forward: image does not match input_size");

  ImageCache<T> cache;
  std::vector<T> act(image.values.begin(), image.values.end());

  for (size_t bi = 0; bi < geom.blocks.size(); ++bi) {
    const auto& g = geom.blocks[bi];
    if (keep_cache) cache.block_in.push_back(act);

    std::vector<T> pre;
    detail::conv_forward(g, act, params.conv[bi].w, params.conv[bi].b, pre);

    // rectifier + 2x2 max pool, tracking winners on the rectified map
    std::vector<T> pooled(static_cast<size_t>(g.out_h) * g.out_w * g.out_c);
    std::vector<int> arg(keep_cache ? pooled.size() : 0);
    for (int y = 0; y < g.out_h; ++y) {
      for (int x = 0; x < g.out_w; ++x) {
        for (int c = 0; c < g.out_c; ++c) {
          T best = T(0);
          int best_idx = -1;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dxp = 0; dxp < 2; ++dxp) {
              const int sy = 2 * y + dy, sx = 2 * x + dxp;
              const int idx = (sy * g.conv_w + sx) * g.out_c + c;
              const T v = std::max(T(0), pre[idx]);
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          const size_t out_idx = (static_cast<size_t>(y) * g.out_w + x) * g.out_c + c;
          pooled[out_idx] = best;
          if (keep_cache) arg[out_idx] = best_idx;
        }
      }
    }
    if (keep_cache) {
      cache.conv_pre.push_back(std::move(pre));
      cache.pool_arg.push_back(std::move(arg));
      cache.pooled.push_back(pooled);
    }
    act = std::move(pooled);
  }

  const auto& last = geom.blocks.back();
  std::vector<T> features;
  if (cfg.global_average_pool) {
    features.assign(static_cast<size_t>(last.out_c), T(0));
    const int hw = last.out_h * last.out_w;
    for (int i = 0; i < hw; ++i)
      for (int c = 0; c < last.out_c; ++c) features[c] += act[static_cast<size_t>(i) * last.out_c + c];
    for (auto& f : features) f = static_cast<T>(f / static_cast<T>(hw));
  } else {
    features = act;
  }

  std::vector<T> dropped = features;
  if (train_mode && cfg.dropout_keep_prob < 1.0) {
    if (!rng) throw std::invalid_argument("forward: train mode requires an rng");
    cache.dropout_mask.resize(features.size());
    const T inv_keep = static_cast<T>(1.0 / cfg.dropout_keep_prob);
    for (size_t i = 0; i < features.size(); ++i) {
      const bool keep = rng->bernoulli(cfg.dropout_keep_prob);
      cache.dropout_mask[i] = keep ? inv_keep : T(0);
      dropped[i] *= cache.dropout_mask[i];
    }
  }

  cache.logits.assign(static_cast<size_t>(cfg.heads), T(0));
  for (int h = 0; h < cfg.heads; ++h) {
    const T* w = &params.head_w[static_cast<size_t>(h) * features.size()];
    T acc = params.head_b[h];
    for (size_t i = 0; i < features.size(); ++i) acc += w[i] * dropped[i];
    cache.logits[h] = acc;
  }

  if (keep_cache) cache.features = std::move(dropped);  // post-dropout, used by head backward
  return cache;
}

template <typename T>
PredictionTriple prediction_from_logits(const std::vector<T>& logits) {
  return {sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
}

/// Backward pass for one image; dlogits is dLoss/dlogit per head. Gradients
/// are accumulated into grads.
template <typename T>
void backward_image(const NetworkConfig& cfg, const NetGeometry& geom,
                    const NetParams<T>& params, const ImageCache<T>& cache,
                    const std::vector<T>& dlogits, NetParams<T>& grads) {
  const size_t nfeat = cache.features.size();

  std::vector<T> dfeat(nfeat, T(0));
  for (int h = 0; h < cfg.heads; ++h) {
    const T d = dlogits[h];
    grads.head_b[h] += d;
    const T* w = &params.head_w[static_cast<size_t>(h) * nfeat];
    T* gw = &grads.head_w[static_cast<size_t>(h) * nfeat];
    for (size_t i = 0; i < nfeat; ++i) {
      gw[i] += d * cache.features[i];
      dfeat[i] += d * w[i];
    }
  }

  if (!cache.dropout_mask.empty())
    for (size_t i = 0; i < nfeat; ++i) dfeat[i] *= cache.dropout_mask[i];

  const auto& last = geom.blocks.back();
  std::vector<T> dact;
  if (cfg.global_average_pool) {
    const int hw = last.out_h * last.out_w;
    dact.assign(static_cast<size_t>(hw) * last.out_c, T(0));
    for (int i = 0; i < hw; ++i)
      for (int c = 0; c < last.out_c; ++c)
        dact[static_cast<size_t>(i) * last.out_c + c] = dfeat[c] / static_cast<T>(hw);
  } else {
    dact = dfeat;
  }

  for (size_t bi = geom.blocks.size(); bi-- > 0;) {
    const auto& g = geom.blocks[bi];
    // pool backward: route into the winning rectified unit, then through the
    // rectifier gate (pre > 0)
    std::vector<T> dpre(cache.conv_pre[bi].size(), T(0));
    const auto& arg = cache.pool_arg[bi];
    for (size_t i = 0; i < dact.size(); ++i) {
      const int src = arg[i];
      if (cache.conv_pre[bi][src] > T(0)) dpre[src] += dact[i];
    }
    std::vector<T> din;
    detail::conv_backward(g, cache.block_in[bi], params.conv[bi].w, dpre, din,
                          grads.conv[bi].w, grads.conv[bi].b);
    dact = std::move(din);
  }
}

/// Binary cross-entropy from a prediction in (0, 1).
inline double bce(double p, double y) {
  constexpr double eps = 1e-12;
  const double q = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

/// Mean over examples of the summed per-head cross-entropies (absent heads
/// skipped) plus weight_decay * 0.5 * ||weights||^2, biases excluded.
template <typename T>
double multitask_loss(const std::vector<PredictionTriple>& preds,
                      const std::vector<HeadLabels>& labels, const NetParams<T>& params,
                      double weight_decay) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("multitask_loss: preds/labels size mismatch");
  if (preds.empty()) throw std::invalid_argument("multitask_loss: empty batch");
  bool any = false;
  double sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    for (int h = 0; h < 3; ++h) {
      const auto y = labels[i].head(h);
      if (!y) continue;
      any = true;
      sum += bce(preds[i].head(h), *y);
    }
  }
  if (!any) throw std::invalid_argument("multitask_loss: no labels present");
  double decay = 0.0;
  for (const auto& ref : array_refs(params))
    if (ref.is_weight)
      for (const T v : *ref.v) decay += static_cast<double>(v) * static_cast<double>(v);
  return sum / static_cast<double>(preds.size()) + weight_decay * 0.5 * decay;
}

/// Training hyperparameters. total_steps is the main desk-scale knob; the
/// remaining defaults are the standard screening-model training recipe.
struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 32;
  double weight_decay = 4e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 0.1;
  double ema_decay = 0.9999;
  long total_steps = 0;
  uint64_t seed = 0;
  long tune_eval_every = 0;  // 0 = total_steps / 10

  void validate() const {
    if (learning_rate <= 0 || weight_decay < 0 || adam_epsilon <= 0)
      throw std::invalid_argument("TrainConfig: rates must be positive");
    if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1))
      throw std::invalid_argument("TrainConfig: betas must be in (0,1)");
    if (!(ema_decay > 0 && ema_decay < 1))
      throw std::invalid_argument("TrainConfig: ema_decay must be in (0,1)");
    if (batch_size < 1 || total_steps < 0)
      throw std::invalid_argument("TrainConfig: bad batch size or step count");
  }
};

template <typename T>
struct LossAndGrads {
  double loss = 0;        // data loss + decay term, as optimized
  double data_loss = 0;   // without the decay term
  NetParams<T> grads;
  std::vector<PredictionTriple> preds;
};

/// Forward + backward over a batch: exact gradient of multitask_loss at the
/// given parameters with the dropout masks fixed by dropout_seed. Per-image
/// work may fan out over threads; gradients are reduced in slot order so the
/// result is identical for any thread count.
template <typename T>
LossAndGrads<T> loss_and_gradients(const NetworkConfig& cfg, const NetParams<T>& params,
                                   const std::vector<const ImageTensor*>& batch,
                                   const std::vector<HeadLabels>& labels, double weight_decay,
                                   uint64_t dropout_seed, int n_threads = 1) {
  if (batch.size() != labels.size())
    throw std::invalid_argument("loss_and_gradients: batch/labels size mismatch");
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  bool any_label = false;
  for (const auto& l : labels) any_label = any_label || l.any();
  if (!any_label) throw std::invalid_argument("loss_and_gradients: no labels present");

  const NetGeometry geom = NetGeometry::resolve(cfg);
  const int n = static_cast<int>(batch.size());
  const double inv_n = 1.0 / n;

  std::vector<NetParams<T>> slot_grads(static_cast<size_t>(n));
  std::vector<double> slot_loss(static_cast<size_t>(n), 0.0);
  std::vector<PredictionTriple> preds(static_cast<size_t>(n));

  parallel_for(n, n_threads, [&](int i) {
    Rng rng = Rng(dropout_seed).derive("img", static_cast<uint64_t>(i));
    ImageCache<T> cache =
        forward_image(cfg, geom, params, *batch[i], /*train_mode=*/true, &rng, /*keep_cache=*/true);
    preds[i] = prediction_from_logits(cache.logits);

    std::vector<T> dlogits(static_cast<size_t>(cfg.heads), T(0));
    double loss_i = 0.0;
    for (int h = 0; h < cfg.heads; ++h) {
      const auto y = labels[i].head(h);
      if (!y) continue;
      const double z = static_cast<double>(cache.logits[h]);
      const double yd = static_cast<double>(*y);
      // stable BCE from the logit: max(z,0) - z*y + log(1 + exp(-|z|))
      loss_i += std::max(z, 0.0) - z * yd + std::log1p(std::exp(-std::fabs(z)));
      dlogits[h] = static_cast<T>((sigmoid(z) - yd) * inv_n);
    }
    slot_loss[i] = loss_i;
    slot_grads[i] = zeros_like(params);
    backward_image(cfg, geom, params, cache, dlogits, slot_grads[i]);
  });

  LossAndGrads<T> out;
  out.grads = zeros_like(params);
  out.preds = std::move(preds);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) loss += slot_loss[i];
  out.data_loss = loss * inv_n;

  auto total = array_refs(out.grads);
  for (int i = 0; i < n; ++i) {
    auto part = array_refs(slot_grads[i]);
    for (size_t a = 0; a < total.size(); ++a) {
      const auto& src = *part[a].v;
      auto& dst = *total[a].v;
      for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

  // coupled L2: the decay enters both the loss and the gradient
  double decay = 0.0;
  auto prefs = array_refs(params);
  for (size_t a = 0; a < prefs.size(); ++a) {
    if (!prefs[a].is_weight) continue;
    const auto& w = *prefs[a].v;
    auto& gw = *total[a].v;
    for (size_t k = 0; k < w.size(); ++k) {
      decay += static_cast<double>(w[k]) * static_cast<double>(w[k]);
      gw[k] += static_cast<T>(weight_decay) * w[k];
    }
  }
  out.loss = out.data_loss + weight_decay * 0.5 * decay;
  return out;
}

template <typename T>
struct AdamState {
  NetParams<T> m, v;
};

template <typename T>
AdamState<T> make_adam_state(const NetParams<T>& params) {
  return {zeros_like(params), zeros_like(params)};
}

/// One Adam update on a flat array: bias-corrected moments, then
/// p -= lr * m_hat / (sqrt(v_hat) + epsilon).
template <typename T>
void adam_update_array(std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m,
                       std::vector<T>& v, const TrainConfig& cfg, long step_index) {
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_index));
  for (size_t i = 0; i < p.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    p[i] = static_cast<T>(static_cast<double>(p[i]) -
                          cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon));
  }
}

template <typename T>
void adam_step(NetParams<T>& params, const NetParams<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg, long step_index) {
  if (step_index < 1) throw std::invalid_argument("adam_step: step_index must be >= 1");
  auto pr = array_refs(params);
  auto gr = array_refs(grads);
  auto mr = array_refs(state.m);
  auto vr = array_refs(state.v);
  for (size_t a = 0; a < pr.size(); ++a) {
    if (gr[a].v->size() != pr[a].v->size())
      throw std::invalid_argument("adam_step: gradient shape mismatch in " + pr[a].name);
    for (const T g : *gr[a].v)
      if (!std::isfinite(static_cast<double>(g)))
        throw std::runtime_error("adam_step: non-finite gradient in " + pr[a].name);
    adam_update_array(*pr[a].v, *gr[a].v, *mr[a].v, *vr[a].v, cfg, step_index);
  }
}

/// ema <- decay * ema + (1 - decay) * params, element-wise.
template <typename T>
void ema_update(NetParams<T>& ema, const NetParams<T>& params, double decay) {
  auto er = array_refs(ema);
  auto pr = array_refs(params);
  for (size_t a = 0; a < er.size(); ++a) {
    if (er[a].v->size() != pr[a].v->size())
      throw std::invalid_argument("ema_update: shape mismatch in " + er[a].name);
    auto& e = *er[a].v;
    const auto& p = *pr[a].v;
    for (size_t i = 0; i < e.size(); ++i)
      e[i] = static_cast<T>(decay * static_cast<double>(e[i]) +
                            (1.0 - decay) * static_cast<double>(p[i]));
  }
}

}  // namespace maculab
