#ifndef AGEPIM_AGING_HPP_
#define AGEPIM_AGING_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agepim/matrix.hpp"

namespace agepim {

struct LayerShape {
  std::size_t rows = 0;  // output neurons
  std::size_t cols = 0;  // fan-in
};

// Per-layer, per-bit-plane degree multipliers in (0,1]. 1.0 marks an
// unaged cell; an aged cell carries the aging degree alpha. The mask is
// the hardware secret key: a cell storing +/-1 reads as +/-(degree * dV).
struct AgingMask {
  int q = 1;
  double sigma = 0.0;  // aging ratio: aged cells / all cells
  double alpha = 1.0;  // aging degree: aged / unaged read voltage
  std::uint64_t seed = 0;
  std::vector<std::vector<Matf>> layers;  // [layer][bit] degree planes

  std::size_t layer_count() const { return layers.size(); }
};

// HCI threshold-voltage drift follows zeta * t^chi. The remaining fields
// document the stress conditions behind a calibration and take no part
// in the arithmetic.
struct NaturalAgingParams {
  double zeta = 0.003972411847853377;  // volts per year^chi
  double chi = 0.4578505828178169;
  double supply_v = 1.2;
  double temperature_k = 323.15;
  double baseline_vth = 0.46893;
};

// Exactly round(sigma*N) cells per plane carry alpha, positions drawn
// uniformly without replacement, independently per bit plane and layer.
AgingMask generate_mask(const std::vector<LayerShape>& shapes, int q,
                        double sigma, double alpha, std::uint64_t seed);

// Per-layer aging ratios (0 disables aging for that layer).
AgingMask generate_mask(const std::vector<LayerShape>& shapes, int q,
                        const std::vector<double>& sigma_per_layer,
                        double alpha, std::uint64_t seed);

// Top-left submatrix of a prototype plane.
Matf subset_mask(const Matf& prototype, std::size_t rows, std::size_t cols);

// Array-reuse mask: one prototype per bit index sized to the largest
// layer; every layer is a top-left subset of it.
AgingMask build_reused_mask(const std::vector<LayerShape>& shapes, int q,
                            double sigma, double alpha, std::uint64_t seed);

// Gaussian jitter on aged cells only: mean alpha, std rel_std*alpha,
// clamped into (0,1). Unaged cells stay exactly 1.
AgingMask apply_process_variation(const AgingMask& mask, double rel_std,
                                  std::uint64_t seed);

// Uniform multiplicative degree shrink on every cell, aged or not,
// floored at 1e-6. Models slow drift under normal use.
AgingMask natural_drift(const AgingMask& mask, double rel_degree_shrink);

double vth_drift(const NaturalAgingParams& params, double years);

// Closed-form two-point power-law calibration through (t1,v1), (t2,v2).
NaturalAgingParams fit_power_law(double t1, double v1, double t2, double v2);

// .mask container: text header, then raw little-endian float32 degrees,
// layer-major with bit index inner.
void save_mask(const AgingMask& mask, const std::filesystem::path& path);
AgingMask load_mask(const std::filesystem::path& path);

}  // namespace agepim

#endif  // AGEPIM_AGING_HPP_
