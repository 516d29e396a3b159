#pragma once

// The retrospective-experiment operator.
//
// Reference data on S_pro are completed to S_all; the test path first goes to
// S_retro and then to S_all. Both are linear in the prospective data, so the
// reported error on S_all is dW^T y_pro with
//   dW = W(S_pro, S_retro) W(S_retro, S_all) - W(S_pro, S_all).
// For any f = <eps, rho>, Cauchy-Schwarz gives |error(z)| <= ||rho|| p(z) with
//   p^2(z) = (dW^T M(S_pro, S_pro) conj(dW))_zz.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/kernel.hpp"
#include "kcrime/phantom.hpp"

namespace kcrime {

struct CrimeOperator {
  SamplingPattern pro;
  SamplingPattern retro;
  SamplingPattern all;
  /// |pro| x |all|.
  Matrix dW;
  double lambda = 0.0;
  std::optional<std::size_t> rank;
  WeightSet pro_retro;
  WeightSet retro_all;
  WeightSet pro_all;

  /// S_pro == S_retro: the retrospective step reproduces its own input.
  bool maximal_crime() const { return pro.same_points(retro); }
};

namespace detail {

inline void require_shared_grid(const SamplingPattern& pro, const SamplingPattern& retro, const SamplingPattern& all) {
  if (pro.grid() != retro.grid() || pro.grid() != all.grid())
    throw GridMismatch("patterns do not share a grid: pro " + pro.grid().to_string() + ", retro " +
                       retro.grid().to_string() + ", all " + all.grid().to_string());
}

}  // namespace detail

/// Builds dW reusing an already assembled M(S_pro, S_pro).
inline CrimeOperator delta_w(const CoilProductTable& tables, const KernelMatrix& m_pro, const SamplingPattern& retro,
                             const SamplingPattern& all, double lambda, std::optional<std::size_t> rank = std::nullopt) {
  if (!m_pro.square()) throw UsageError("delta_w needs M(S_pro, S_pro)");
  const SamplingPattern& pro = m_pro.rows;
  detail::require_shared_grid(pro, retro, all);
  detail::require_grid(tables.grid, pro, "prospective");

  WeightSet pro_retro, pro_all;
  {
    WeightSolver solver(m_pro, lambda, rank);
    pro_retro = solver.solve(pro.same_points(retro) ? m_pro : kernel_matrix(tables, pro, retro));
    pro_all = solver.solve(pro.same_points(all) ? m_pro : kernel_matrix(tables, pro, all));
  }
  WeightSet retro_all;
  {
    const KernelMatrix m_retro = kernel_matrix(tables, retro, retro);
    WeightSolver solver(m_retro, lambda, rank);
    retro_all = solver.solve(retro.same_points(all) ? m_retro : kernel_matrix(tables, retro, all));
  }

  Matrix dw = -pro_all.W;
  dw.noalias() += pro_retro.W * retro_all.W;
  return CrimeOperator{pro,    retro, all, std::move(dw), lambda, rank, std::move(pro_retro), std::move(retro_all),
                       std::move(pro_all)};
}

inline CrimeOperator delta_w(const CoilProductTable& tables, const SamplingPattern& pro, const SamplingPattern& retro,
                             const SamplingPattern& all, double lambda, std::optional<std::size_t> rank = std::nullopt) {
  detail::require_shared_grid(pro, retro, all);
  return delta_w(tables, kernel_matrix(tables, pro, pro), retro, all, lambda, rank);
}

inline Vector to_vector(const CArray& values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

/// (reconstruction via S_retro) - (direct reconstruction) on S_all, as dW^T y_pro.
inline Vector experiment_error(const CrimeOperator& op, const AcquiredData& y_pro) {
  if (!y_pro.pattern.same_points(op.pro))
    throw UsageError("acquired data pattern '" + y_pro.pattern.label() + "' is not the operator's S_pro '" +
                     op.pro.label() + "'");
  return op.dW.transpose() * to_vector(y_pro.values);
}

struct PowerMap {
  SamplingPattern target;
  /// p^2 per target point, clamped at zero.
  std::vector<double> p2;
  /// Magnitude reference for the residue checks: max diag(M_pro) * max_z ||dW_z||^2.
  double scale = 0.0;
  /// Most negative real part seen before clamping.
  double min_raw = 0.0;
  /// Largest |imag| residue seen.
  double max_imag = 0.0;

  double mean() const {
    return p2.empty() ? 0.0 : std::accumulate(p2.begin(), p2.end(), 0.0) / static_cast<double>(p2.size());
  }
  double max() const { return p2.empty() ? 0.0 : *std::max_element(p2.begin(), p2.end()); }
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::distance(p2.begin(), std::max_element(p2.begin(), p2.end())));
  }
  /// Standard deviation over mean.
  double coefficient_of_variation() const {
    const double m = mean();
    if (m <= 0.0) return 0.0;
    double var = 0.0;
    for (double v : p2) var += (v - m) * (v - m);
    return std::sqrt(var / static_cast<double>(p2.size())) / m;
  }

  /// p^2 laid out as one row-major k-space array per coil (zero off-target).
  std::vector<std::vector<double>> per_coil() const {
    const auto& g = target.grid();
    std::vector<std::vector<double>> maps(static_cast<std::size_t>(g.coils),
                                          std::vector<double>(static_cast<std::size_t>(g.locations()), 0.0));
    for (std::size_t i = 0; i < target.size(); ++i)
      maps[static_cast<std::size_t>(target[i].coil)][static_cast<std::size_t>(target.location(i))] = p2[i];
    return maps;
  }
};

/// p^2(z) = Re((dW_z)^T M_pro conj(dW_z)) column by column, in blocks so the
/// |S_all|^2 product is never formed.
inline PowerMap power_map(const CrimeOperator& op, const KernelMatrix& m_pro, Index block = 256) {
  if (!m_pro.rows.same_points(op.pro) || !m_pro.cols.same_points(op.pro))
    throw UsageError("power_map needs M(S_pro, S_pro) for the operator's S_pro");
  if (m_pro.data.rows() != op.dW.rows()) throw UsageError("kernel and operator dimensions differ");

  PowerMap pm;
  pm.target = op.all;
  const Index n = op.dW.cols();
  pm.p2.resize(static_cast<std::size_t>(n));
  const double diag_max = m_pro.data.diagonal().real().maxCoeff();
  const double col_max = op.dW.colwise().squaredNorm().maxCoeff();
  pm.scale = diag_max * col_max;
  const double tol = 1e-9 * pm.scale;

  for (Index c0 = 0; c0 < n; c0 += block) {
    const Index bs = std::min(block, n - c0);
    const auto cols = op.dW.middleCols(c0, bs);
    Matrix t(m_pro.data.rows(), bs);
    t.noalias() = m_pro.data * cols.conjugate();
    const Eigen::RowVectorXcd v = cols.cwiseProduct(t).colwise().sum();
    for (Index k = 0; k < bs; ++k) {
      const double re = v(k).real();
      const double im = v(k).imag();
      pm.max_imag = std::max(pm.max_imag, std::abs(im));
      pm.min_raw = std::min(pm.min_raw, re);
      if (std::abs(im) > tol)
        throw NumericError("power function has imaginary residue " + std::to_string(im) + " at target " +
                           std::to_string(c0 + k));
      if (re < -tol)
        throw NumericError("power function is negative (" + std::to_string(re) + ") at target " +
                           std::to_string(c0 + k) + "; kernel matrix is not PSD");
      pm.p2[static_cast<std::size_t>(c0 + k)] = std::max(re, 0.0);
    }
  }
  return pm;
}

struct VerificationReport {
  /// max_z (|error(z)| - rkhs_norm_bound * p(z)); <= 0 when the bound holds.
  double max_violation = 0.0;
  double rkhs_norm_bound = 0.0;
  /// rkhs_norm_bound * p(z) - |error(z)| per target.
  std::vector<double> margins;
  double tolerance = 0.0;
  std::size_t violations = 0;
  bool pass = false;
};

/// Data magnitude reference: ||rho|| * max_a ||eps_a||, bounding any single sample.
inline double bound_scale(const KernelMatrix& m_pro, double rho_l2) {
  return rho_l2 * std::sqrt(m_pro.data.diagonal().real().maxCoeff());
}

/// Checks |dW^T y_pro| <= ||rho||_2 p pointwise on noiseless discrete data.
inline VerificationReport verify_bound(const CrimeOperator& op, const KernelMatrix& m_pro, const GroundTruth& gt,
                                       double tolerance) {
  if (gt.mode != PhantomMode::discrete || !gt.rho)
    throw UsageError("bound verification needs a discrete-mode ground truth");
  const auto y = acquire(gt, op.pro, std::nullopt, 0);
  const Vector err = experiment_error(op, y);
  const PowerMap pm = power_map(op, m_pro);

  VerificationReport rep;
  rep.rkhs_norm_bound = gt.rho_l2;
  rep.tolerance = tolerance;
  rep.margins.resize(pm.p2.size());
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < pm.p2.size(); ++z) {
    const double bound = gt.rho_l2 * std::sqrt(pm.p2[z]);
    const double e = std::abs(err(static_cast<Index>(z)));
    rep.margins[z] = bound - e;
    rep.max_violation = std::max(rep.max_violation, e - bound);
    if (e > bound + tolerance) ++rep.violations;
  }
  rep.pass = rep.max_violation <= tolerance;
  return rep;
}

}  // namespace kcrime
