#ifndef AGEPIM_DOFT_HPP_
#define AGEPIM_DOFT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "agepim/aging.hpp"
#include "agepim/data.hpp"
#include "agepim/matrix.hpp"
#include "agepim/network.hpp"
#include "agepim/pim.hpp"

namespace agepim {

enum class LossKind { kCrossEntropy, kMse };

struct TrainConfig {
  double lambda = 0.05;  // adversarial weight
  double eta = 0.01;     // learning rate
  int epochs = 10;
  int batch_size = 128;
  LossKind loss = LossKind::kCrossEntropy;
  double adv_cap = 0.0;   // cap on the unauthorized loss term; <=0 -> 2 ln C
  int patience = 3;       // plateau epochs before stopping
  double momentum = 0.0;  // 0 = plain SGD
  std::uint64_t seed = 0;
  std::size_t val_count = 5000;  // tail of the training set held out

  double effective_cap(std::size_t classes) const;
};

struct LossBreakdown {
  double total = 0.0;
  double loss_auth = 0.0;
  double loss_unauth = 0.0;
  bool capped = false;
};

// mean L(auth) - lambda * min(mean L(unauth), cap). The raw adversarial
// term is unbounded below; the cap keeps training finite while leaving
// the operating region (unauthorized near chance) untouched.
LossBreakdown doft_loss(const Matd& scores_auth, const Matd& scores_unauth,
                        std::span<const std::uint8_t> labels,
                        const TrainConfig& cfg);

// Test switches for the smooth path used by gradient checks; production
// forward/backward keeps all of them on.
struct AblationOptions {
  bool binarize_weights = true;
  bool quantize_inputs = true;
  bool adc_floor = true;
  bool quantize_bias = true;
};

// Functional forward with everything backward needs retained per layer.
struct LayerCache {
  Matd x_codes;  // quantized inputs, batch x in
  Matd w_eff;    // degree-scaled effective weights, out x in
  Matd o;        // pre-activation codes after bias, batch x out
};

struct BranchCache {
  std::vector<LayerCache> layers;
  Matd logits;  // real-valued, batch x classes
};

BranchCache forward_cached(const Network& net, const Matd& inputs,
                           const AgingMask* mask, const PimConfig& cfg,
                           const AblationOptions& opts = {});

struct Gradients {
  std::vector<std::vector<Matd>> w_fp;       // [layer][bit]
  std::vector<std::vector<double>> bias;     // [layer][neuron]

  void axpy(double a, const Gradients& g);   // this += a * g
};

Gradients zero_gradients(const Network& net);

// One branch of the chain, starting from d loss / d logits. Straight
//-through estimators stand in for Binary, the input rounding and the ADC
// floor; relu and the inter-layer clamp gate as usual. Degrees multiply
// the weight gradients on the authorized branch.
Gradients backward_from_dlogits(const Network& net, const BranchCache& cache,
                                const Matd& dlogits, const AgingMask* mask,
                                const PimConfig& cfg,
                                const AblationOptions& opts = {});

struct BackwardResult {
  LossBreakdown loss;
  Gradients grads;
  std::vector<double> act_peak;  // per layer, max real post-activation
};

// Dual forward + combined gradient. mask == nullptr trains the plain
// quantized network (both branches coincide; the unauthorized pass is
// skipped when lambda is 0).
BackwardResult backward(const Network& net, const Matd& inputs,
                        std::span<const std::uint8_t> labels,
                        const AgingMask* mask, const PimConfig& pim,
                        const TrainConfig& cfg,
                        const AblationOptions& opts = {});

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc_auth = 0.0;
  double val_acc_unauth = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool plateaued = false;
};

// Step-II: SGD on the shadow planes per the combined objective,
// binarize after every step, stop on epoch budget or when the best
// validation loss stalls for `patience` epochs.
TrainResult train_doft(Network& net, const Dataset& train,
                       const AgingMask& mask, const TrainConfig& cfg,
                       const PimConfig& pim);

// Quantization-aware baseline: same loop, lambda = 0, no mask,
// activation scales tracked as a running max and then frozen.
TrainResult pretrain(Network& net, const Dataset& train,
                     const TrainConfig& cfg, const PimConfig& pim);

// Top-1 accuracy; ties resolve to the lowest class id.
double evaluate(const Network& net, const Dataset& split,
                const AgingMask* mask, const PimConfig& pim, SimMode mode);

}  // namespace agepim

#endif  // AGEPIM_DOFT_HPP_
