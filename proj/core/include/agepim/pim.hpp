#ifndef AGEPIM_PIM_HPP_
#define AGEPIM_PIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "agepim/aging.hpp"
#include "agepim/matrix.hpp"
#include "agepim/network.hpp"
#include "agepim/quantize.hpp"

namespace agepim {

// SRAM array geometry and ADC parameters. With the defaults one unaged
// unit product equals one ADC LSB and the unaged simulator is an exact
// integer engine: a 64-row column of +/-1 cells spans codes -64..+64.
struct PimConfig {
  int array_rows = 64;
  int array_cols = 64;
  int adc_bits = 7;
  double v_inter = 0.01;  // ADC read-voltage interval (volts per code)
  double v_cell = 0.01;   // unaged per-cell read-voltage step
  int adc_min = -64;
  int adc_max = 64;
  int weight_bits = 1;  // q
  int input_bits = 8;   // n

  void validate() const;
  // One unit product in ADC LSBs. Computed once so that v_cell == v_inter
  // gives exactly 1.0 and integer column sums digitize exactly.
  double lsb_ratio() const { return v_cell / v_inter; }
};

// clamp(floor(v / v_inter), adc_min, adc_max); floor is toward -inf.
int adc(double volts, const PimConfig& cfg);

// Analog column accumulation: sum_p x_p * w_p * d_p * v_cell over one
// tile (at most array_rows cells).
double column_dot(std::span<const std::uint8_t> x_bits,
                  std::span<const float> w_bits,
                  std::span<const float> degrees, const PimConfig& cfg);

struct LayerOutput {
  Matd pre;   // ADC-code domain, bias already added digitally
  Matd post;  // activation applied elementwise
};

enum class SimMode { kBitExact, kFunctional };

// sum_i 2^i * D[i] (.) W[i]; mask_planes == nullptr means unit degrees.
Matd effective_weights(const BitPlanes& bits,
                       const std::vector<Matf>* mask_planes);

// Hardware-faithful path: inputs streamed bit-serially, weights tiled
// into ceil(in/array_rows) row tiles, every tile digitized separately
// (with saturation) and shift-added digitally.
LayerOutput layer_forward_bitexact(const InputPlanes& x, const BitPlanes& w,
                                   const std::vector<Matf>* mask_planes,
                                   std::span<const double> bias_codes,
                                   const PimConfig& cfg, Activation h);

// Training-time model: one lumped product, one floor, no per-tile
// saturation. Exactly equals the bit-exact path when nothing is aged and
// no tile saturates.
LayerOutput layer_forward_functional(const Matd& a_real, const BitPlanes& w,
                                     const std::vector<Matf>* mask_planes,
                                     std::span<const double> bias_codes,
                                     const PimConfig& cfg, Activation h);

// Per-layer code scale: one pre-activation ADC code corresponds to this
// many real units of w.x + b.
double code_scale(const Network& net, const PimConfig& cfg, std::size_t layer);

std::vector<double> bias_codes_for_layer(const Network& net,
                                         const PimConfig& cfg,
                                         std::size_t layer);

// Full forward pass: activations requantized to n bits between layers,
// final layer emits raw integer scores (batch x classes). mask == nullptr
// simulates an unauthorized chip (unit degrees everywhere).
Matd network_forward(const Network& net, const AgingMask* mask,
                     const PimConfig& cfg, SimMode mode, const Matd& inputs);

}  // namespace agepim

#endif  // AGEPIM_PIM_HPP_
