#ifndef AGEPIM_QUANTIZE_HPP_
#define AGEPIM_QUANTIZE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "agepim/matrix.hpp"

namespace agepim {

// q-deep stack of {+1,-1} planes for one layer's weights. Plane i
// carries weight 2^i (i = 0 .. q-1), so the reconstructed integer code
// sum_i 2^i * b_i ranges over the odd integers of [-(2^q-1), 2^q-1].
// `scale` maps codes back to real weights.
struct BitPlanes {
  int q = 1;
  std::vector<Matf> planes;  // q matrices, entries exactly +1 or -1
  double scale = 1.0;

  std::size_t rows() const { return planes.empty() ? 0 : planes[0].rows(); }
  std::size_t cols() const { return planes.empty() ? 0 : planes[0].cols(); }
};

// n-deep stack of {0,1} planes for one activation vector. Plane j
// carries weight 2^j; the reconstructed value lies in [0, 2^n-1].
struct InputPlanes {
  int n = 8;
  std::size_t len = 0;
  std::vector<std::vector<std::uint8_t>> planes;
  std::size_t saturated = 0;  // inputs clamped into [0,1] before coding
};

int max_code(int q);  // 2^q - 1

// Sign-bit vector of one odd code. Errors on even or out-of-range codes.
std::vector<float> decompose(long code, int q);

// sum_i 2^i * b_i over +/-1 bits.
long reconstruct(std::span<const float> bits);

// Snaps each weight to the nearest representable odd code (ties toward
// +inf) at scale = max|w| / (2^q - 1); an all-zero matrix gets scale 1.
BitPlanes quantize_weights(const Matd& w, int q);

// Integer codes of the planes as a dense matrix.
Matd reconstruct_codes(const BitPlanes& b);

// value[i] = round(a[i] * (2^n - 1)), half toward +inf, inputs clamped
// to [0,1] with a saturation count.
InputPlanes quantize_inputs(std::span<const double> a, int n);

long input_value(const InputPlanes& x, std::size_t i);

// Fast path used by the functional simulator: the same codes without
// plane decomposition, for a whole batch at once.
Matd quantize_input_codes(const Matd& a, int n, std::size_t* saturated = nullptr);

}  // namespace agepim

#endif  // AGEPIM_QUANTIZE_HPP_
