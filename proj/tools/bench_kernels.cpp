// Compares the serial reference matmul kernels against the OpenMP-parallel
// ones and asserts bitwise agreement while timing both.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <vector>

#include "gkrnn/kernels.hpp"
#include "gkrnn/rng.hpp"

using namespace gkrnn;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() /
         static_cast<double>(reps);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);

  std::cout << "kernel,m,k,n,serial_ms,parallel_ms,speedup,bitwise_equal\n";
  Rng rng(12345);
  bool all_equal = true;
  for (std::size_t dim : {64, 128, 256, 512}) {
    const std::size_t m = dim, k = dim, n = dim;
    const std::vector<double> a = random_vec(rng, m * k);
    const std::vector<double> b = random_vec(rng, n * k);

    struct Variant {
      const char* name;
      std::function<void(const double*, const double*, double*)> serial;
      std::function<void(const double*, const double*, double*)> parallel;
    };
    const std::vector<Variant> variants = {
        {"nt",
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_nt_serial(pa, pb, pc, m, k, n);
         },
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_nt_parallel(pa, pb, pc, m, k, n);
         }},
        {"nn",
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_nn_serial(pa, pb, pc, m, k, n);
         },
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_nn_parallel(pa, pb, pc, m, k, n);
         }},
        {"tn",
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_tn_serial(pa, pb, pc, k, m, n);
         },
         [&](const double* pa, const double* pb, double* pc) {
           kernels::matmul_tn_parallel(pa, pb, pc, k, m, n);
         }}};

    for (const auto& v : variants) {
      std::vector<double> c_serial(m * n, 0.0), c_parallel(m * n, 0.0);
      const double serial_ms = time_ms(
          [&] {
            std::fill(c_serial.begin(), c_serial.end(), 0.0);
            v.serial(a.data(), b.data(), c_serial.data());
          },
          reps);
      const double parallel_ms = time_ms(
          [&] {
            std::fill(c_parallel.begin(), c_parallel.end(), 0.0);
            v.parallel(a.data(), b.data(), c_parallel.data());
          },
          reps);
      const bool equal = c_serial == c_parallel;
      all_equal = all_equal && equal;
      std::cout << v.name << ',' << m << ',' << k << ',' << n << ','
                << serial_ms << ',' << parallel_ms << ','
                << serial_ms / parallel_ms << ',' << (equal ? "yes" : "no")
                << "\n";
    }
  }
  if (!all_equal) {
    std::cerr << "parallel kernels diverged from the serial reference\n";
    return 1;
  }
  return 0;
}
