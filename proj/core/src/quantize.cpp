#include "agepim/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "agepim/common.hpp"

namespace agepim {

namespace {
void check_q(int q) {
  if (q < 1 || q > 24) fail(ErrorCategory::kShape, "bit count q out of range");
}
}  // namespace

int max_code(int q) {
  check_q(q);
  return (1 << q) - 1;
}

std::vector<float> decompose(long code, int q) {
  const long m = max_code(q);
  if (code < -m || code > m || (code & 1L) == 0)
    fail(ErrorCategory::kNumeric,
         "invalid weight code " + std::to_string(code) + " for q=" +
             std::to_string(q));
  // code = 2v - (2^q - 1) with v in [0, 2^q - 1]; the bits of v give the
  // sign pattern.
  const unsigned long v = static_cast<unsigned long>(code + m) >> 1;
  std::vector<float> bits(q);
  for (int i = 0; i < q; ++i)
    bits[i] = ((v >> i) & 1UL) ? 1.0f : -1.0f;
  return bits;
}

long reconstruct(std::span<const float> bits) {
  long s = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const float b = bits[i];
    if (b != 1.0f && b != -1.0f)
      fail(ErrorCategory::kNumeric, "bit plane entry is not +1/-1");
    s += (b > 0 ? 1L : -1L) << i;
  }
  return s;
}

BitPlanes quantize_weights(const Matd& w, int q) {
  const int m = max_code(q);
  double wmax = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (double x : w.row(r)) {
      if (!std::isfinite(x)) fail(ErrorCategory::kNumeric, "non-finite weight");
      wmax = std::max(wmax, std::fabs(x));
    }
  BitPlanes out;
  out.q = q;
  out.scale = wmax > 0.0 ? wmax / m : 1.0;
  out.planes.assign(q, Matf(w.rows(), w.cols()));
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const double u = w(r, c) / out.scale;
      // nearest odd integer, ties toward +inf
      long code = 2L * static_cast<long>(round_half_up((u - 1.0) / 2.0)) + 1L;
      code = std::clamp<long>(code, -m, m);
      const unsigned long v = static_cast<unsigned long>(code + m) >> 1;
      for (int i = 0; i < q; ++i)
        out.planes[i](r, c) = ((v >> i) & 1UL) ? 1.0f : -1.0f;
    }
  }
  return out;
}

Matd reconstruct_codes(const BitPlanes& b) {
  Matd codes(b.rows(), b.cols());
  for (int i = 0; i < b.q; ++i) {
    const double w = static_cast<double>(1L << i);
    for (std::size_t r = 0; r < codes.rows(); ++r)
      for (std::size_t c = 0; c < codes.cols(); ++c)
        codes(r, c) += w * b.planes[i](r, c);
  }
  return codes;
}

InputPlanes quantize_inputs(std::span<const double> a, int n) {
  const long m = max_code(n);
  InputPlanes out;
  out.n = n;
  out.len = a.size();
  out.planes.assign(n, std::vector<std::uint8_t>(a.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i];
    if (x < 0.0 || x > 1.0) {
      ++out.saturated;
      x = std::clamp(x, 0.0, 1.0);
    }
    const long v = static_cast<long>(round_half_up(x * m));
    for (int j = 0; j < n; ++j)
      out.planes[j][i] = static_cast<std::uint8_t>((v >> j) & 1L);
  }
  return out;
}

long input_value(const InputPlanes& x, std::size_t i) {
  long v = 0;
  for (int j = 0; j < x.n; ++j)
    v += static_cast<long>(x.planes[j][i]) << j;
  return v;
}

Matd quantize_input_codes(const Matd& a, int n, std::size_t* saturated) {
  const double m = static_cast<double>(max_code(n));
  Matd codes(a.rows(), a.cols());
  std::size_t sat = 0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double x = a(r, c);
      if (x < 0.0 || x > 1.0) {
        ++sat;
        x = std::clamp(x, 0.0, 1.0);
      }
      codes(r, c) = round_half_up(x * m);
    }
  }
  if (saturated) *saturated = sat;
  return codes;
}

}  // namespace agepim
