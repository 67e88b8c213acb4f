#include "agepim/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace agepim {

namespace {
std::atomic<int> g_threads{1};
}

void set_default_threads(int n) {
  if (n <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    n = hw == 0 ? 1 : static_cast<int>(hw);
  }
  g_threads.store(n);
}

int default_threads() { return g_threads.load(); }

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 0) threads = default_threads();
  std::size_t k = std::min<std::size_t>(threads, n);
  if (k <= 1 || n < 64) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(k);
  std::size_t chunk = (n + k - 1) / k;
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& w : workers) w.join();
}

void matmul_nt(const Matd& a, const Matd& b, Matd& c, int threads) {
  if (a.cols() != b.cols()) fail(ErrorCategory::kShape, "matmul_nt: inner dims");
  c = Matd(a.rows(), b.rows());
  const std::size_t k = a.cols();
  parallel_for(a.rows(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* ai = a.data() + i * k;
      double* ci = c.data() + i * b.rows();
      for (std::size_t j = 0; j < b.rows(); ++j) {
        const double* bj = b.data() + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = s;
      }
    }
  });
}

void matmul_nn(const Matd& a, const Matd& b, Matd& c, int threads) {
  if (a.cols() != b.rows()) fail(ErrorCategory::kShape, "matmul_nn: inner dims");
  c = Matd(a.rows(), b.cols());
  const std::size_t k = a.cols(), n = b.cols();
  parallel_for(a.rows(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* ai = a.data() + i * k;
      double* ci = c.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ai[p];
        if (aip == 0.0) continue;
        const double* bp = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  });
}

void matmul_tn(const Matd& a, const Matd& b, Matd& c, int threads) {
  if (a.rows() != b.rows()) fail(ErrorCategory::kShape, "matmul_tn: inner dims");
  c = Matd(a.cols(), b.cols());
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  parallel_for(m, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double* ci = c.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a.data()[p * m + i];
        if (aip == 0.0) continue;
        const double* bp = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  });
}

}  // namespace agepim
