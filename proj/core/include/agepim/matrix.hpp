#ifndef AGEPIM_MATRIX_HPP_
#define AGEPIM_MATRIX_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "agepim/common.hpp"

namespace agepim {

// Dense row-major matrix. Double for all accumulation paths, float for
// bit planes and aging degrees (which are persisted as 32-bit floats).
template <typename T>
class Mat {
 public:
  Mat() : rows_(0), cols_(0) {}
  Mat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return v_[r * cols_ + c];
  }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }

  std::span<T> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {v_.data() + r * cols_, cols_};
  }

  bool same_shape(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<T> v_;
};

using Matd = Mat<double>;
using Matf = Mat<float>;
using Matu8 = Mat<std::uint8_t>;

// Thread count used by parallel_for when the caller passes 0.
void set_default_threads(int n);
int default_threads();

// Splits [0, n) into contiguous chunks, one worker thread per chunk.
// Each chunk writes disjoint output, so results are identical for any
// thread count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

// c = a * b^T   a: m x k, b: n x k, c: m x n
void matmul_nt(const Matd& a, const Matd& b, Matd& c, int threads = 0);
// c = a * b     a: m x k, b: k x n, c: m x n
void matmul_nn(const Matd& a, const Matd& b, Matd& c, int threads = 0);
// c = a^T * b   a: k x m, b: k x n, c: m x n  (k summed in index order)
void matmul_tn(const Matd& a, const Matd& b, Matd& c, int threads = 0);

}  // namespace agepim

#endif  // AGEPIM_MATRIX_HPP_
