#pragma once

// Multidimensional DFT on row-major arrays (FFTW backend).
// Forward: X(k) = sum_n x(n) exp(-2 pi i k.n / N), unnormalized.
// Inverse: x(n) = (1/prod N) sum_k X(k) exp(+2 pi i k.n / N).

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include "kcrime/errors.hpp"

namespace kcrime {

using Complex = std::complex<double>;
using CArray = std::vector<Complex>;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline void fftw_execute_inplace(CArray& data, const std::vector<int>& dims, int sign) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  if (data.size() != n) throw UsageError("DFT input size does not match grid extents");
  if (n == 0) return;
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), ptr, ptr, sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw NumericError("FFTW could not create a plan");
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace detail

inline CArray dft(CArray data, const std::vector<int>& dims) {
  detail::fftw_execute_inplace(data, dims, FFTW_FORWARD);
  return data;
}

inline CArray idft(CArray data, const std::vector<int>& dims) {
  detail::fftw_execute_inplace(data, dims, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
  return data;
}

/// Adjoint of the unnormalized forward DFT (= prod N * idft).
inline CArray dft_adjoint(CArray data, const std::vector<int>& dims) {
  detail::fftw_execute_inplace(data, dims, FFTW_BACKWARD);
  return data;
}

/// Signed frequency of index k on an axis of length n: [0,n) -> [-n/2, n/2).
inline int signed_frequency(int k, int n) { return k < (n + 1) / 2 ? k : k - n; }

}  // namespace kcrime
