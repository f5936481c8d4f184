#include "gkrnn/kernels.hpp"

#include <atomic>

namespace gkrnn::kernels {

namespace {
std::atomic<bool> g_serial_only{false};
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 32 * 1024;
}  // namespace

void set_serial_only(bool serial_only) { g_serial_only.store(serial_only); }
bool serial_only() { return g_serial_only.load(); }

void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* ai = a + i * k;
      const double* bj = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
}

void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

void matmul_nt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* ai = a + i * k;
      const double* bj = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_tn_parallel(const double* a, const double* b, double* c,
                        std::size_t k, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (!g_serial_only.load() && m * k * n >= kParallelThreshold)
    matmul_nt_parallel(a, b, c, m, k, n);
  else
    matmul_nt_serial(a, b, c, m, k, n);
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (!g_serial_only.load() && m * k * n >= kParallelThreshold)
    matmul_nn_parallel(a, b, c, m, k, n);
  else
    matmul_nn_serial(a, b, c, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t k, std::size_t m, std::size_t n) {
  if (!g_serial_only.load() && m * k * n >= kParallelThreshold)
    matmul_tn_parallel(a, b, c, k, m, n);
  else
    matmul_tn_serial(a, b, c, k, m, n);
}

}  // namespace gkrnn::kernels
