#pragma once

// Slow reference implementations for tests. Everything here is built from
// explicit encoding vectors and plain loops; nothing goes through the FFT
// tables or the Cholesky path used by the library proper.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "kcrime/coils.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/kernel.hpp"

namespace kcrime::oracle {

inline constexpr Index kMaxOracleSize = 512;

inline void guard(const GridSpec& g) {
  if (g.size() > kMaxOracleSize)
    throw UsageError("oracle limited to prod(dims) * coils <= 512, got " + std::to_string(g.size()));
}

/// Explicit encoding vectors eps_z(r) = conj(c_j(r)) exp(+2 pi i x.r / N),
/// one column per pattern point.
struct DenseEncodingSet {
  GridSpec grid;
  Matrix vectors;
};

inline DenseEncodingSet encoding_set(const CoilModel& coils, const SamplingPattern& s) {
  guard(coils.grid);
  const auto& g = coils.grid;
  DenseEncodingSet es{g, Matrix(g.locations(), static_cast<Index>(s.size()))};
  for (std::size_t col = 0; col < s.size(); ++col) {
    const auto& p = s[col];
    for (Index loc = 0; loc < g.locations(); ++loc) {
      const auto r = g.unravel(loc);
      double phase = 0.0;
      for (std::size_t d = 0; d < g.ndims(); ++d)
        phase += static_cast<double>(p.kidx[d]) * r[d] / static_cast<double>(g.dims[d]);
      es.vectors(loc, static_cast<Index>(col)) =
          std::conj(coils.map(p.coil)[static_cast<std::size_t>(loc)]) *
          std::exp(Complex{0.0, 2.0 * std::numbers::pi * phase});
    }
  }
  return es;
}

/// Gram matrix <eps_a, eps_b> by explicit summation.
inline Matrix oracle_kernel(const CoilModel& coils, const SamplingPattern& a, const SamplingPattern& b) {
  const auto ea = encoding_set(coils, a);
  const auto eb = encoding_set(coils, b);
  Matrix m(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      Complex s{};
      for (Index r = 0; r < ea.vectors.rows(); ++r) s += std::conj(ea.vectors(r, i)) * eb.vectors(r, j);
      m(i, j) = s;
    }
  return m;
}

/// sum_r c_a(r) conj(c_b(r)) exp(-2 pi i delta.r / N) for every offset.
inline CArray oracle_table(const CoilModel& coils, int a, int b) {
  guard(coils.grid);
  const auto& g = coils.grid;
  CArray out(static_cast<std::size_t>(g.locations()));
  for (Index off = 0; off < g.locations(); ++off) {
    const auto delta = g.unravel(off);
    Complex s{};
    for (Index loc = 0; loc < g.locations(); ++loc) {
      const auto r = g.unravel(loc);
      double phase = 0.0;
      for (std::size_t d = 0; d < g.ndims(); ++d)
        phase += static_cast<double>(delta[d]) * r[d] / static_cast<double>(g.dims[d]);
      s += coils.map(a)[static_cast<std::size_t>(loc)] * std::conj(coils.map(b)[static_cast<std::size_t>(loc)]) *
           std::exp(Complex{0.0, -2.0 * std::numbers::pi * phase});
    }
    out[static_cast<std::size_t>(off)] = s;
  }
  return out;
}

/// Weights from the interpolant M_BA (M_AA + lI)^-1 y = W^T y, i.e.
/// W = (M_AA + lI)^-T M_BA^T, via LU on the transposed system.
inline Matrix oracle_weights(const CoilModel& coils, const SamplingPattern& a, const SamplingPattern& b,
                             double lambda) {
  Matrix maa = oracle_kernel(coils, a, a);
  for (Index i = 0; i < maa.rows(); ++i) maa(i, i) += lambda;
  const Matrix mba = oracle_kernel(coils, b, a);
  const Matrix at = maa.transpose();
  return Eigen::PartialPivLU<Matrix>(at).solve(Matrix(mba.transpose()));
}

inline Matrix oracle_delta_w(const CoilModel& coils, const SamplingPattern& pro, const SamplingPattern& retro,
                             const SamplingPattern& all, double lambda) {
  const Matrix w1 = oracle_weights(coils, pro, retro, lambda);
  const Matrix w2 = oracle_weights(coils, retro, all, lambda);
  const Matrix w0 = oracle_weights(coils, pro, all, lambda);
  Matrix dw(w0.rows(), w0.cols());
  for (Index p = 0; p < dw.rows(); ++p)
    for (Index z = 0; z < dw.cols(); ++z) {
      Complex s{};
      for (Index r = 0; r < w1.cols(); ++r) s += w1(p, r) * w2(r, z);
      dw(p, z) = s - w0(p, z);
    }
  return dw;
}

/// p^2(z) = sum_p sum_p' <eps_p, eps_p'> dw(p,z) conj(dw(p',z)), real part.
inline std::vector<double> oracle_power(const CoilModel& coils, const SamplingPattern& pro,
                                        const SamplingPattern& retro, const SamplingPattern& all, double lambda) {
  const Matrix dw = oracle_delta_w(coils, pro, retro, all, lambda);
  const Matrix m = oracle_kernel(coils, pro, pro);
  std::vector<double> p2(static_cast<std::size_t>(dw.cols()));
  for (Index z = 0; z < dw.cols(); ++z) {
    Complex s{};
    for (Index p = 0; p < dw.rows(); ++p)
      for (Index q = 0; q < dw.rows(); ++q) s += m(p, q) * dw(p, z) * std::conj(dw(q, z));
    p2[static_cast<std::size_t>(z)] = s.real();
  }
  return p2;
}

}  // namespace kcrime::oracle
