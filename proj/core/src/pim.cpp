#include "agepim/pim.hpp"

#include <algorithm>
#include <cmath>

#include "agepim/common.hpp"

namespace agepim {

void PimConfig::validate() const {
  if (array_rows < 1 || array_cols < 1)
    fail(ErrorCategory::kConfig, "array dims must be positive");
  if (v_inter <= 0.0 || v_cell <= 0.0)
    fail(ErrorCategory::kConfig, "voltage steps must be positive");
  if (adc_min >= adc_max) fail(ErrorCategory::kConfig, "adc code range empty");
  if (adc_max - adc_min + 1 > (1 << adc_bits) + 1)
    fail(ErrorCategory::kConfig, "adc code range exceeds adc resolution");
}

int adc(double volts, const PimConfig& cfg) {
  if (!std::isfinite(volts)) fail(ErrorCategory::kNumeric, "non-finite voltage");
  const double code = std::floor(volts / cfg.v_inter);
  return static_cast<int>(
      std::clamp(code, static_cast<double>(cfg.adc_min),
                 static_cast<double>(cfg.adc_max)));
}

double column_dot(std::span<const std::uint8_t> x_bits,
                  std::span<const float> w_bits,
                  std::span<const float> degrees, const PimConfig& cfg) {
  if (x_bits.size() != w_bits.size() || w_bits.size() != degrees.size())
    fail(ErrorCategory::kShape, "column_dot: length mismatch");
  if (x_bits.size() > static_cast<std::size_t>(cfg.array_rows))
    fail(ErrorCategory::kShape, "column_dot: more cells than array rows");
  double s = 0.0;
  for (std::size_t p = 0; p < x_bits.size(); ++p)
    if (x_bits[p])
      s += static_cast<double>(w_bits[p]) * static_cast<double>(degrees[p]);
  return s * cfg.v_cell;
}

Matd effective_weights(const BitPlanes& bits,
                       const std::vector<Matf>* mask_planes) {
  if (mask_planes && mask_planes->size() != static_cast<std::size_t>(bits.q))
    fail(ErrorCategory::kShape, "mask has wrong plane count for layer");
  Matd w(bits.rows(), bits.cols());
  for (int i = 0; i < bits.q; ++i) {
    const Matf& plane = bits.planes[i];
    if (mask_planes && !(*mask_planes)[i].same_shape(plane))
      fail(ErrorCategory::kShape, "mask plane shape mismatch");
    const double pw = static_cast<double>(1L << i);
    const float* d = mask_planes ? (*mask_planes)[i].data() : nullptr;
    for (std::size_t k = 0; k < plane.size(); ++k)
      w.data()[k] += pw * plane.data()[k] * (d ? d[k] : 1.0f);
  }
  return w;
}

namespace {

// Per-tile digitization in LSB units: floor(sum * v_cell/v_inter) with the
// ratio applied once. Equivalent to adc(column_dot(..)*..) in exact
// arithmetic, but keeps integer column sums exact instead of routing them
// through two float divisions.
inline double adc_from_unit_sum(double unit_sum, double ratio,
                                const PimConfig& cfg) {
  const double code = std::floor(unit_sum * ratio);
  return std::clamp(code, static_cast<double>(cfg.adc_min),
                    static_cast<double>(cfg.adc_max));
}

inline void apply_activation(const Matd& pre, Activation h, Matd& post) {
  post = pre;
  if (h == Activation::kRelu)
    for (std::size_t k = 0; k < post.size(); ++k)
      post.data()[k] = std::max(0.0, post.data()[k]);
}

}  // namespace

LayerOutput layer_forward_bitexact(const InputPlanes& x, const BitPlanes& w,
                                   const std::vector<Matf>* mask_planes,
                                   std::span<const double> bias_codes,
                                   const PimConfig& cfg, Activation h) {
  cfg.validate();
  if (x.len != w.cols())
    fail(ErrorCategory::kShape, "input length does not match layer fan-in");
  if (!bias_codes.empty() && bias_codes.size() != w.rows())
    fail(ErrorCategory::kShape, "bias length does not match layer width");
  // Degree-scaled weight planes, built once per call.
  std::vector<Matf> wd(w.q, Matf(w.rows(), w.cols()));
  for (int i = 0; i < w.q; ++i) {
    const Matf& plane = w.planes[i];
    if (mask_planes) {
      const Matf& d = (*mask_planes)[i];
      if (!d.same_shape(plane))
        fail(ErrorCategory::kShape, "mask plane shape mismatch");
      for (std::size_t k = 0; k < plane.size(); ++k)
        wd[i].data()[k] = plane.data()[k] * d.data()[k];
    } else {
      wd[i] = plane;
    }
  }
  const double ratio = cfg.lsb_ratio();
  const std::size_t in = w.cols();
  const std::size_t tiles =
      (in + static_cast<std::size_t>(cfg.array_rows) - 1) /
      static_cast<std::size_t>(cfg.array_rows);

  LayerOutput out;
  out.pre = Matd(1, w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (int i = 0; i < w.q; ++i) {
      const float* wr = wd[i].data() + r * in;
      for (int j = 0; j < x.n; ++j) {
        const std::uint8_t* xj = x.planes[j].data();
        const double shift = static_cast<double>(1L << (i + j));
        for (std::size_t t = 0; t < tiles; ++t) {
          const std::size_t lo = t * cfg.array_rows;
          const std::size_t hi = std::min(in, lo + cfg.array_rows);
          double s = 0.0;
          for (std::size_t c = lo; c < hi; ++c)
            if (xj[c]) s += wr[c];
          acc += shift * adc_from_unit_sum(s, ratio, cfg);
        }
      }
    }
    out.pre(0, r) = acc + (bias_codes.empty() ? 0.0 : bias_codes[r]);
  }
  apply_activation(out.pre, h, out.post);
  return out;
}

LayerOutput layer_forward_functional(const Matd& a_real, const BitPlanes& w,
                                     const std::vector<Matf>* mask_planes,
                                     std::span<const double> bias_codes,
                                     const PimConfig& cfg, Activation h) {
  cfg.validate();
  if (a_real.cols() != w.cols())
    fail(ErrorCategory::kShape, "input length does not match layer fan-in");
  if (!bias_codes.empty() && bias_codes.size() != w.rows())
    fail(ErrorCategory::kShape, "bias length does not match layer width");
  const Matd codes = quantize_input_codes(a_real, cfg.input_bits);
  const Matd w_eff = effective_weights(w, mask_planes);
  LayerOutput out;
  matmul_nt(codes, w_eff, out.pre);
  const double ratio = cfg.lsb_ratio();
  for (std::size_t b = 0; b < out.pre.rows(); ++b)
    for (std::size_t r = 0; r < out.pre.cols(); ++r)
      out.pre(b, r) = std::floor(out.pre(b, r) * ratio) +
                      (bias_codes.empty() ? 0.0 : bias_codes[r]);
  apply_activation(out.pre, h, out.post);
  return out;
}

double code_scale(const Network& net, const PimConfig& cfg, std::size_t layer) {
  const double prev_scale = layer == 0 ? 1.0 : net.layers[layer - 1].act_scale;
  return net.layers[layer].bits.scale * prev_scale /
         static_cast<double>(max_code(net.n)) / cfg.lsb_ratio();
}

std::vector<double> bias_codes_for_layer(const Network& net,
                                         const PimConfig& cfg,
                                         std::size_t layer) {
  const double cs = code_scale(net, cfg, layer);
  const Layer& l = net.layers[layer];
  std::vector<double> codes(l.out);
  for (std::size_t r = 0; r < l.out; ++r)
    codes[r] = round_half_up(l.bias[r] / cs);
  return codes;
}

Matd network_forward(const Network& net, const AgingMask* mask,
                     const PimConfig& cfg, SimMode mode, const Matd& inputs) {
  if (net.layers.empty()) fail(ErrorCategory::kShape, "empty network");
  if (mask && mask->layer_count() != net.layers.size())
    fail(ErrorCategory::kShape, "mask layer count does not match network");
  PimConfig c = cfg;
  c.weight_bits = net.q;
  c.input_bits = net.n;
  c.validate();

  Matd a = inputs;
  Matd scores;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    const std::vector<Matf>* planes = mask ? &mask->layers[l] : nullptr;
    const std::vector<double> bias = bias_codes_for_layer(net, c, l);
    Matd pre(a.rows(), layer.out);
    if (mode == SimMode::kFunctional) {
      LayerOutput lo =
          layer_forward_functional(a, layer.bits, planes, bias, c, layer.act);
      pre = std::move(lo.pre);
    } else {
      parallel_for(a.rows(), 0, [&](std::size_t lo_b, std::size_t hi_b) {
        for (std::size_t b = lo_b; b < hi_b; ++b) {
          std::vector<double> row(a.row(b).begin(), a.row(b).end());
          const InputPlanes xp = quantize_inputs(row, net.n);
          LayerOutput lo = layer_forward_bitexact(xp, layer.bits, planes, bias,
                                                  c, layer.act);
          for (std::size_t r = 0; r < layer.out; ++r) pre(b, r) = lo.pre(0, r);
        }
      });
    }
    if (layer.act == Activation::kIdentity && l + 1 == net.layers.size()) {
      scores = std::move(pre);
      break;
    }
    // relu, then rescale codes into [0,1] for the next layer's bit-serial
    // streaming; clamp models the finite activation range.
    const double cs = code_scale(net, c, l);
    Matd next(pre.rows(), pre.cols());
    for (std::size_t k = 0; k < pre.size(); ++k) {
      const double post = std::max(0.0, pre.data()[k]);
      next.data()[k] = std::min(post * cs / layer.act_scale, 1.0);
    }
    a = std::move(next);
  }
  return scores;
}

}  // namespace agepim
