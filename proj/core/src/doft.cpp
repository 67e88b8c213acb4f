#include "agepim/doft.hpp"

#include <algorithm>
#include <cmath>

#include "agepim/common.hpp"
#include "agepim/rng.hpp"

namespace agepim {

double TrainConfig::effective_cap(std::size_t classes) const {
  if (adv_cap > 0.0) return adv_cap;
  return 2.0 * std::log(static_cast<double>(classes));
}

namespace {

// mean loss and d loss / d logits (already divided by batch size)
double loss_and_grad(const Matd& logits, std::span<const std::uint8_t> labels,
                     LossKind kind, Matd* dlogits) {
  const std::size_t b = logits.rows(), c = logits.cols();
  if (b == 0) fail(ErrorCategory::kShape, "empty batch");
  if (labels.size() != b) fail(ErrorCategory::kShape, "label count mismatch");
  if (dlogits) *dlogits = Matd(b, c);
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double* z = logits.data() + i * c;
    const std::uint8_t y = labels[i];
    if (y >= c) fail(ErrorCategory::kData, "label outside score range");
    if (kind == LossKind::kCrossEntropy) {
      double zmax = z[0];
      for (std::size_t k = 1; k < c; ++k) zmax = std::max(zmax, z[k]);
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - zmax);
      const double lse = zmax + std::log(sum);
      total += (lse - z[y]) * inv_b;
      if (dlogits) {
        double* g = dlogits->data() + i * c;
        for (std::size_t k = 0; k < c; ++k)
          g[k] = (std::exp(z[k] - lse) - (k == y ? 1.0 : 0.0)) * inv_b;
      }
    } else {  // mse against one-hot
      double* g = dlogits ? dlogits->data() + i * c : nullptr;
      for (std::size_t k = 0; k < c; ++k) {
        const double t = k == y ? 1.0 : 0.0;
        total += 0.5 * (z[k] - t) * (z[k] - t) * inv_b;
        if (g) g[k] = (z[k] - t) * inv_b;
      }
    }
  }
  return total;
}

double mean_loss(const Matd& logits, std::span<const std::uint8_t> labels,
                 LossKind kind) {
  return loss_and_grad(logits, labels, kind, nullptr);
}

}  // namespace

LossBreakdown doft_loss(const Matd& scores_auth, const Matd& scores_unauth,
                        std::span<const std::uint8_t> labels,
                        const TrainConfig& cfg) {
  LossBreakdown out;
  out.loss_auth = mean_loss(scores_auth, labels, cfg.loss);
  out.loss_unauth = mean_loss(scores_unauth, labels, cfg.loss);
  const double cap = cfg.effective_cap(scores_auth.cols());
  out.capped = out.loss_unauth >= cap;
  out.total = out.loss_auth - cfg.lambda * std::min(out.loss_unauth, cap);
  return out;
}

BranchCache forward_cached(const Network& net, const Matd& inputs,
                           const AgingMask* mask, const PimConfig& cfg,
                           const AblationOptions& opts) {
  if (net.layers.empty()) fail(ErrorCategory::kShape, "empty network");
  if (mask && mask->layer_count() != net.layers.size())
    fail(ErrorCategory::kShape, "mask layer count does not match network");
  PimConfig c = cfg;
  c.weight_bits = net.q;
  c.input_bits = net.n;
  c.validate();
  const double m = static_cast<double>(max_code(net.n));
  const double ratio = c.lsb_ratio();

  BranchCache cache;
  cache.layers.resize(net.layers.size());
  Matd a = inputs;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    LayerCache& lc = cache.layers[l];
    const std::vector<Matf>* planes = mask ? &mask->layers[l] : nullptr;

    if (opts.quantize_inputs) {
      lc.x_codes = quantize_input_codes(a, net.n);
    } else {
      lc.x_codes = a;
      for (std::size_t k = 0; k < lc.x_codes.size(); ++k)
        lc.x_codes.data()[k] *= m;
    }

    if (opts.binarize_weights) {
      lc.w_eff = effective_weights(layer.bits, planes);
    } else {
      // smooth path: shadow planes enter directly
      lc.w_eff = Matd(layer.out, layer.in);
      for (int i = 0; i < net.q; ++i) {
        const Matd& fp = layer.w_fp[i];
        const double pw = static_cast<double>(1L << i);
        const float* d = planes ? (*planes)[i].data() : nullptr;
        for (std::size_t k = 0; k < fp.size(); ++k)
          lc.w_eff.data()[k] += pw * fp.data()[k] * (d ? d[k] : 1.0f);
      }
    }

    Matd s;
    matmul_nt(lc.x_codes, lc.w_eff, s);
    const double cs = code_scale(net, c, l);
    lc.o = Matd(s.rows(), s.cols());
    for (std::size_t b = 0; b < s.rows(); ++b) {
      for (std::size_t r = 0; r < s.cols(); ++r) {
        const double f = opts.adc_floor ? std::floor(s(b, r) * ratio)
                                        : s(b, r) * ratio;
        const double bc = opts.quantize_bias
                              ? round_half_up(layer.bias[r] / cs)
                              : layer.bias[r] / cs;
        lc.o(b, r) = f + bc;
      }
    }

    if (l + 1 == net.layers.size()) {
      cache.logits = Matd(lc.o.rows(), lc.o.cols());
      for (std::size_t k = 0; k < lc.o.size(); ++k)
        cache.logits.data()[k] = lc.o.data()[k] * cs;
    } else {
      Matd next(lc.o.rows(), lc.o.cols());
      const double rescale = cs / layer.act_scale;
      for (std::size_t k = 0; k < lc.o.size(); ++k) {
        const double post = std::max(0.0, lc.o.data()[k]);
        next.data()[k] = std::min(post * rescale, 1.0);
      }
      a = std::move(next);
    }
  }
  return cache;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.w_fp.resize(net.layers.size());
  g.bias.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.w_fp[l].assign(net.q, Matd(net.layers[l].out, net.layers[l].in));
    g.bias[l].assign(net.layers[l].out, 0.0);
  }
  return g;
}

void Gradients::axpy(double a, const Gradients& g) {
  for (std::size_t l = 0; l < w_fp.size(); ++l) {
    for (std::size_t i = 0; i < w_fp[l].size(); ++i) {
      Matd& dst = w_fp[l][i];
      const Matd& src = g.w_fp[l][i];
      for (std::size_t k = 0; k < dst.size(); ++k)
        dst.data()[k] += a * src.data()[k];
    }
    for (std::size_t r = 0; r < bias[l].size(); ++r)
      bias[l][r] += a * g.bias[l][r];
  }
}

Gradients backward_from_dlogits(const Network& net, const BranchCache& cache,
                                const Matd& dlogits, const AgingMask* mask,
                                const PimConfig& cfg,
                                const AblationOptions& opts) {
  PimConfig c = cfg;
  c.weight_bits = net.q;
  c.input_bits = net.n;
  const double m = static_cast<double>(max_code(net.n));
  const double ratio = c.lsb_ratio();
  const std::size_t last = net.layers.size() - 1;

  Gradients grads = zero_gradients(net);
  Matd d_o;  // d loss / d pre-activation codes of current layer
  {
    const double cs = code_scale(net, c, last);
    d_o = Matd(dlogits.rows(), dlogits.cols());
    for (std::size_t k = 0; k < dlogits.size(); ++k)
      d_o.data()[k] = dlogits.data()[k] * cs;
  }

  for (std::size_t l = last + 1; l-- > 0;) {
    const Layer& layer = net.layers[l];
    const LayerCache& lc = cache.layers[l];
    const double cs = code_scale(net, c, l);

    // bias: O += round(b/cs), STE through the rounding
    for (std::size_t r = 0; r < layer.out; ++r) {
      double s = 0.0;
      for (std::size_t b = 0; b < d_o.rows(); ++b) s += d_o(b, r);
      grads.bias[l][r] = s / cs;
    }

    // d_s = d_o * ratio (floor passes gradients through unchanged)
    Matd d_s = d_o;
    if (ratio != 1.0)
      for (std::size_t k = 0; k < d_s.size(); ++k) d_s.data()[k] *= ratio;

    Matd d_weff;
    matmul_tn(d_s, lc.x_codes, d_weff);
    const std::vector<Matf>* planes = mask ? &mask->layers[l] : nullptr;
    for (int i = 0; i < net.q; ++i) {
      const double pw = static_cast<double>(1L << i);
      Matd& g = grads.w_fp[l][i];
      const float* d = planes ? (*planes)[i].data() : nullptr;
      for (std::size_t k = 0; k < g.size(); ++k)
        g.data()[k] = pw * d_weff.data()[k] * (d ? d[k] : 1.0f);
    }

    if (l == 0) break;

    Matd d_x;
    matmul_nn(d_s, lc.w_eff, d_x);
    // previous layer: a = min(relu(O_prev) * cs_prev / act_scale, 1)
    const Layer& prev = net.layers[l - 1];
    const LayerCache& pc = cache.layers[l - 1];
    const double cs_prev = code_scale(net, c, l - 1);
    const double rescale = cs_prev / prev.act_scale;
    Matd d_o_prev(pc.o.rows(), pc.o.cols());
    for (std::size_t k = 0; k < d_o_prev.size(); ++k) {
      const double o = pc.o.data()[k];
      const double post = std::max(0.0, o) * rescale;
      double g = d_x.data()[k] * m;  // STE through input rounding
      g = post < 1.0 ? g * rescale : 0.0;
      g = o > 0.0 ? g : 0.0;  // relu
      d_o_prev.data()[k] = g;
    }
    d_o = std::move(d_o_prev);
  }
  return grads;
}

BackwardResult backward(const Network& net, const Matd& inputs,
                        std::span<const std::uint8_t> labels,
                        const AgingMask* mask, const PimConfig& pim,
                        const TrainConfig& cfg, const AblationOptions& opts) {
  BackwardResult out;
  const BranchCache auth = forward_cached(net, inputs, mask, pim, opts);

  // running max of real post-activation per hidden layer, for scale
  // calibration during pretraining
  out.act_peak.assign(net.layers.size(), 0.0);
  {
    PimConfig c = pim;
    c.weight_bits = net.q;
    c.input_bits = net.n;
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
      const double cs = code_scale(net, c, l);
      double peak = 0.0;
      for (std::size_t k = 0; k < auth.layers[l].o.size(); ++k)
        peak = std::max(peak, auth.layers[l].o.data()[k] * cs);
      out.act_peak[l] = peak;
    }
  }

  Matd d_auth;
  out.loss.loss_auth = loss_and_grad(auth.logits, labels, cfg.loss, &d_auth);
  out.grads = backward_from_dlogits(net, auth, d_auth, mask, pim, opts);

  if (cfg.lambda != 0.0 || mask != nullptr) {
    const BranchCache unauth = forward_cached(net, inputs, nullptr, pim, opts);
    Matd d_unauth;
    out.loss.loss_unauth =
        loss_and_grad(unauth.logits, labels, cfg.loss, &d_unauth);
    const double cap = cfg.effective_cap(unauth.logits.cols());
    out.loss.capped = out.loss.loss_unauth >= cap;
    if (cfg.lambda != 0.0 && !out.loss.capped) {
      const Gradients g_unauth =
          backward_from_dlogits(net, unauth, d_unauth, nullptr, pim, opts);
      out.grads.axpy(-cfg.lambda, g_unauth);
    }
    out.loss.total =
        out.loss.loss_auth - cfg.lambda * std::min(out.loss.loss_unauth, cap);
  } else {
    out.loss.loss_unauth = out.loss.loss_auth;
    out.loss.total = out.loss.loss_auth;
  }
  if (!std::isfinite(out.loss.total))
    fail(ErrorCategory::kNumeric, "training diverged: non-finite loss");
  return out;
}

namespace {

struct Momentum {
  std::vector<std::vector<Matd>> w_fp;
  std::vector<std::vector<double>> bias;
};

void sgd_step(Network& net, const Gradients& g, double eta, double mu,
              Momentum* mom) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    for (int i = 0; i < net.q; ++i) {
      Matd& w = layer.w_fp[i];
      const Matd& gw = g.w_fp[l][i];
      if (mu != 0.0) {
        Matd& v = mom->w_fp[l][i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          v.data()[k] = mu * v.data()[k] + gw.data()[k];
          w.data()[k] -= eta * v.data()[k];
        }
      } else {
        for (std::size_t k = 0; k < w.size(); ++k)
          w.data()[k] -= eta * gw.data()[k];
      }
    }
    for (std::size_t r = 0; r < layer.out; ++r) {
      if (mu != 0.0) {
        double& v = mom->bias[l][r];
        v = mu * v + g.bias[l][r];
        layer.bias[r] -= eta * v;
      } else {
        layer.bias[r] -= eta * g.bias[l][r];
      }
    }
  }
}

double accuracy_from_scores(const Matd& scores,
                            std::span<const std::uint8_t> labels) {
  std::size_t hits = 0;
  for (std::size_t b = 0; b < scores.rows(); ++b) {
    const double* z = scores.data() + b * scores.cols();
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.cols(); ++k)
      if (z[k] > z[best]) best = k;
    if (best == labels[b]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

// Shared loop for pretraining (mask == nullptr, scales tracked) and DOFT.
TrainResult train_loop(Network& net, const Dataset& train,
                       const AgingMask* mask, const TrainConfig& cfg,
                       const PimConfig& pim, bool update_scales) {
  if (train.count() == 0) fail(ErrorCategory::kData, "empty training set");
  if (cfg.batch_size < 1) fail(ErrorCategory::kConfig, "batch_size >= 1");
  const std::size_t val_count = std::min(cfg.val_count, train.count() / 5);
  const std::size_t train_count = train.count() - val_count;
  if (train_count == 0) fail(ErrorCategory::kData, "no training items left");

  std::vector<std::uint32_t> order(train_count);
  for (std::size_t i = 0; i < train_count; ++i)
    order[i] = static_cast<std::uint32_t>(i);
  std::vector<std::uint32_t> val_idx(val_count);
  for (std::size_t i = 0; i < val_count; ++i)
    val_idx[i] = static_cast<std::uint32_t>(train_count + i);

  Momentum mom;
  if (cfg.momentum != 0.0) {
    Gradients z = zero_gradients(net);
    mom.w_fp = z.w_fp;
    mom.bias = z.bias;
  }

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  int stalled = 0;
  Matd batch;
  std::vector<std::uint8_t> batch_labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch-shuffle", epoch));
    shuffle_indices(shuffle_rng, order);
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t off = 0; off < train_count; off += cfg.batch_size) {
      const std::size_t take = std::min<std::size_t>(cfg.batch_size,
                                                     train_count - off);
      std::span<const std::uint32_t> idx(order.data() + off, take);
      fill_batch(train, idx, batch);
      batch_labels.resize(take);
      for (std::size_t i = 0; i < take; ++i)
        batch_labels[i] = train.labels[idx[i]];
      BackwardResult step = backward(net, batch, batch_labels, mask, pim, cfg);
      sgd_step(net, step.grads, cfg.eta, cfg.momentum,
               cfg.momentum != 0.0 ? &mom : nullptr);
      binarize_step(net);
      if (update_scales)
        for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
          net.layers[l].act_scale =
              std::max(net.layers[l].act_scale, step.act_peak[l]);
      epoch_loss += step.loss.total;
      ++steps;
    }
    net.epoch += 1;

    EpochStats stats;
    stats.epoch = net.epoch;
    stats.train_loss = epoch_loss / static_cast<double>(steps);
    if (val_count > 0) {
      fill_batch(train, val_idx, batch);
      batch_labels.assign(val_count, 0);
      for (std::size_t i = 0; i < val_count; ++i)
        batch_labels[i] = train.labels[val_idx[i]];
      const BranchCache auth = forward_cached(net, batch, mask, pim);
      const BranchCache unauth = forward_cached(net, batch, nullptr, pim);
      const LossBreakdown vl =
          doft_loss(auth.logits, unauth.logits, batch_labels, cfg);
      stats.val_loss = vl.total;
      stats.val_acc_auth = accuracy_from_scores(auth.logits, batch_labels);
      stats.val_acc_unauth = accuracy_from_scores(unauth.logits, batch_labels);
      if (!std::isfinite(stats.val_loss))
        fail(ErrorCategory::kNumeric, "training diverged: non-finite loss");
    } else {
      stats.val_loss = stats.train_loss;
      stats.val_acc_auth = stats.val_acc_unauth = 0.0;
    }
    result.history.push_back(stats);

    // plateau: relative improvement below 1e-4 for `patience` epochs
    const double improvement =
        (best_val - stats.val_loss) / std::max(1.0, std::fabs(best_val));
    if (std::isinf(best_val) || improvement >= 1e-4) {
      stalled = 0;
    } else {
      ++stalled;
    }
    best_val = std::min(best_val, stats.val_loss);
    if (stalled >= cfg.patience) {
      result.plateaued = true;
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train_doft(Network& net, const Dataset& train,
                       const AgingMask& mask, const TrainConfig& cfg,
                       const PimConfig& pim) {
  // shadow planes restart at the binarization fixed point of the
  // pretrained deployable weights
  for (auto& layer : net.layers)
    for (int i = 0; i < net.q; ++i)
      for (std::size_t k = 0; k < layer.w_fp[i].size(); ++k)
        layer.w_fp[i].data()[k] = layer.bits.planes[i].data()[k];
  return train_loop(net, train, &mask, cfg, pim, /*update_scales=*/false);
}

TrainResult pretrain(Network& net, const Dataset& train,
                     const TrainConfig& cfg, const PimConfig& pim) {
  TrainConfig c = cfg;
  c.lambda = 0.0;
  return train_loop(net, train, nullptr, c, pim, /*update_scales=*/true);
}

double evaluate(const Network& net, const Dataset& split,
                const AgingMask* mask, const PimConfig& pim, SimMode mode) {
  if (split.count() == 0) fail(ErrorCategory::kData, "empty evaluation split");
  const std::size_t chunk = 1024;
  std::size_t hits = 0;
  Matd batch;
  std::vector<std::uint32_t> idx;
  for (std::size_t off = 0; off < split.count(); off += chunk) {
    const std::size_t take = std::min(chunk, split.count() - off);
    idx.resize(take);
    for (std::size_t i = 0; i < take; ++i)
      idx[i] = static_cast<std::uint32_t>(off + i);
    fill_batch(split, idx, batch);
    const Matd scores = network_forward(net, mask, pim, mode, batch);
    for (std::size_t b = 0; b < take; ++b) {
      const double* z = scores.data() + b * scores.cols();
      std::size_t best = 0;
      for (std::size_t k = 1; k < scores.cols(); ++k)
        if (z[k] > z[best]) best = k;
      if (best == split.labels[off + b]) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(split.count());
}

}  // namespace agepim
