#pragma once

// Full-grid reconstructions and error maps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kcrime/coils.hpp"
#include "kcrime/crime.hpp"
#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/kernel.hpp"
#include "kcrime/phantom.hpp"

namespace kcrime {

enum class ReconMethod { rkhs, lsq };

inline const char* to_string(ReconMethod m) { return m == ReconMethod::rkhs ? "rkhs" : "lsq"; }

/// Pixels whose total coil sensitivity falls below this are masked.
inline constexpr double kSensitivityFloor = 1e-12;

struct ReconResult {
  GridSpec grid;
  /// Per-coil k-space on the full grid.
  std::vector<CArray> kspace_full;
  /// Coil-combined image.
  CArray image;
  /// false where sum_j |c_j|^2 < kSensitivityFloor.
  std::vector<bool> valid;
  ReconMethod method = ReconMethod::rkhs;
  double lambda = 0.0;
  int iterations = 0;
  /// Relative normal-equation residual (lsq only).
  double residual = 0.0;
  /// false when lsq stopped at max_iter above tolerance; the iterate is still returned.
  bool converged = true;
};

/// sum_j conj(c_j) IDFT(k_j) / sum_j |c_j|^2, zero at masked pixels.
inline void combine_coils(const CoilModel& coils, ReconResult& r) {
  const auto n = static_cast<std::size_t>(coils.grid.locations());
  r.image.assign(n, Complex{});
  r.valid.assign(n, true);
  std::vector<double> den(n, 0.0);
  for (int j = 0; j < coils.coils(); ++j) {
    const auto img = idft(r.kspace_full[static_cast<std::size_t>(j)], coils.grid.dims);
    for (std::size_t i = 0; i < n; ++i) {
      r.image[i] += std::conj(coils.map(j)[i]) * img[i];
      den[i] += std::norm(coils.map(j)[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (den[i] < kSensitivityFloor) {
      r.image[i] = Complex{};
      r.valid[i] = false;
    } else {
      r.image[i] /= den[i];
    }
  }
}

/// Scatters values aligned with `pattern` into per-coil full-grid arrays.
inline std::vector<CArray> scatter(const SamplingPattern& pattern, const Vector& values) {
  const auto& g = pattern.grid();
  std::vector<CArray> out(static_cast<std::size_t>(g.coils), CArray(static_cast<std::size_t>(g.locations())));
  for (std::size_t i = 0; i < pattern.size(); ++i)
    out[static_cast<std::size_t>(pattern[i].coil)][static_cast<std::size_t>(pattern.location(i))] =
        values(static_cast<Index>(i));
  return out;
}

/// Gathers full-grid per-coil k-space at the points of `pattern`.
inline AcquiredData subsample(const ReconResult& r, const SamplingPattern& pattern) {
  if (pattern.grid() != r.grid)
    throw GridMismatch("pattern grid " + pattern.grid().to_string() + " does not match reconstruction grid " +
                       r.grid.to_string());
  AcquiredData d{pattern, CArray(pattern.size()), 0, std::nullopt, 0.0};
  for (std::size_t i = 0; i < pattern.size(); ++i)
    d.values[i] = r.kspace_full[static_cast<std::size_t>(pattern[i].coil)][static_cast<std::size_t>(pattern.location(i))];
  return d;
}

/// kspace on S_all = W(S_data, S_all)^T y with precomputed weights.
inline ReconResult rkhs_reconstruct(const CoilModel& coils, const WeightSet& w, const AcquiredData& data) {
  if (!data.pattern.same_points(w.src)) throw UsageError("data pattern does not match the weight source pattern");
  ReconResult r;
  r.grid = coils.grid;
  r.method = ReconMethod::rkhs;
  r.lambda = w.lambda;
  const Vector k = w.W.transpose() * to_vector(data.values);
  r.kspace_full = scatter(w.dst, k);
  combine_coils(coils, r);
  return r;
}

inline ReconResult rkhs_reconstruct(const CoilProductTable& tables, const CoilModel& coils, const AcquiredData& data,
                                    const SamplingPattern& all, double lambda,
                                    std::optional<std::size_t> rank = std::nullopt) {
  return rkhs_reconstruct(coils, weights(tables, data.pattern, all, lambda, rank), data);
}

/// 1e-6 * mean_r (A^H A)_rr, with (A^H A)_rr = sum over samples of |c_j(r)|^2.
inline double default_image_lambda(const CoilModel& coils, const SamplingPattern& pattern) {
  std::vector<double> per_coil(static_cast<std::size_t>(coils.coils()), 0.0);
  for (const auto& p : pattern.points()) per_coil[static_cast<std::size_t>(p.coil)] += 1.0;
  double total = 0.0;
  for (int j = 0; j < coils.coils(); ++j) {
    double s = 0.0;
    for (const auto& v : coils.map(j)) s += std::norm(v);
    total += per_coil[static_cast<std::size_t>(j)] * s;
  }
  return 1e-6 * total / static_cast<double>(coils.grid.locations());
}

/// Image-domain least squares (SENSE-style):
///   min_x ||A x - y||^2 + lambda ||x||^2,  (A x)_i = DFT(c_{j_i} x)(k_i),
/// solved by conjugate gradients on the normal equations.
inline ReconResult lsq_reconstruct(const CoilModel& coils, const AcquiredData& data,
                                   std::optional<double> lambda_img = std::nullopt, double tol = 1e-8,
                                   int max_iter = 1000) {
  if (data.pattern.grid() != coils.grid)
    throw GridMismatch("data grid " + data.pattern.grid().to_string() + " does not match coil grid " +
                       coils.grid.to_string());
  const auto& dims = coils.grid.dims;
  const auto n = static_cast<std::size_t>(coils.grid.locations());
  const double lambda = lambda_img.value_or(default_image_lambda(coils, data.pattern));
  if (!(lambda >= 0.0)) throw UsageError("image lambda must be >= 0");

  // Sampling mask per coil, used by A^H A.
  std::vector<std::vector<char>> mask(static_cast<std::size_t>(coils.coils()), std::vector<char>(n, 0));
  for (std::size_t i = 0; i < data.pattern.size(); ++i)
    mask[static_cast<std::size_t>(data.pattern[i].coil)][static_cast<std::size_t>(data.pattern.location(i))] = 1;

  auto normal_op = [&](const CArray& x) {
    CArray out(n, Complex{});
    for (int j = 0; j < coils.coils(); ++j) {
      CArray t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = coils.map(j)[i] * x[i];
      t = dft(std::move(t), dims);
      const auto& m = mask[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < n; ++i)
        if (!m[i]) t[i] = Complex{};
      t = dft_adjoint(std::move(t), dims);
      for (std::size_t i = 0; i < n; ++i) out[i] += std::conj(coils.map(j)[i]) * t[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] += lambda * x[i];
    return out;
  };

  CArray rhs(n, Complex{});
  {
    const auto ks = scatter(data.pattern, to_vector(data.values));
    for (int j = 0; j < coils.coils(); ++j) {
      const auto t = dft_adjoint(ks[static_cast<std::size_t>(j)], dims);
      for (std::size_t i = 0; i < n; ++i) rhs[i] += std::conj(coils.map(j)[i]) * t[i];
    }
  }
  auto dot = [](const CArray& a, const CArray& b) {
    Complex s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
  };

  CArray x(n, Complex{}), r = rhs, p = rhs;
  const double rhs_norm = std::sqrt(dot(rhs, rhs).real());
  double rr = dot(r, r).real();
  int it = 0;
  if (rhs_norm > 0.0) {
    while (std::sqrt(rr) > tol * rhs_norm && it < max_iter) {
      const CArray ap = normal_op(p);
      const double alpha = rr / dot(p, ap).real();
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_new = dot(r, r).real();
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
      rr = rr_new;
      ++it;
    }
  }
  const double residual = rhs_norm > 0.0 ? std::sqrt(rr) / rhs_norm : 0.0;
  for (const auto& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError("least-squares reconstruction diverged after " + std::to_string(it) + " iterations");

  ReconResult out;
  out.grid = coils.grid;
  out.method = ReconMethod::lsq;
  out.lambda = lambda;
  out.iterations = it;
  out.residual = residual;
  out.converged = residual <= tol;
  for (int j = 0; j < coils.coils(); ++j) {
    CArray t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = coils.map(j)[i] * x[i];
    out.kspace_full.push_back(dft(std::move(t), dims));
  }
  out.image = std::move(x);
  out.valid.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < coils.coils(); ++j) s += std::norm(coils.map(j)[i]);
    if (s < kSensitivityFloor) {
      out.valid[i] = false;
      out.image[i] = Complex{};
    }
  }
  return out;
}

struct ErrorMaps {
  std::vector<CArray> kspace_err;
  std::vector<double> image_err;
  double nrmse = 0.0;
  double max_abs = 0.0;
};

/// test - ref, pointwise. nrmse is over valid image pixels.
inline ErrorMaps error_maps(const ReconResult& test, const ReconResult& ref) {
  if (test.grid != ref.grid)
    throw GridMismatch("reconstruction grids differ: " + test.grid.to_string() + " vs " + ref.grid.to_string());
  ErrorMaps e;
  for (std::size_t j = 0; j < ref.kspace_full.size(); ++j) {
    CArray d(ref.kspace_full[j].size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = test.kspace_full[j][i] - ref.kspace_full[j][i];
    e.kspace_err.push_back(std::move(d));
  }
  e.image_err.assign(ref.image.size(), 0.0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.image.size(); ++i) {
    if (!ref.valid[i] || !test.valid[i]) continue;
    const double d = std::abs(test.image[i] - ref.image[i]);
    e.image_err[i] = d;
    num += d * d;
    den += std::norm(ref.image[i]);
  }
  if (!(den > 0.0)) throw NumericError("reference image is zero; nrmse is undefined");
  e.nrmse = std::sqrt(num / den);
  e.max_abs = *std::max_element(e.image_err.begin(), e.image_err.end());
  return e;
}

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace detail

/// Spearman rank correlation (ties get average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw UsageError("spearman needs two equal-length samples");
  const auto ra = detail::average_ranks(a);
  const auto rb = detail::average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace kcrime
