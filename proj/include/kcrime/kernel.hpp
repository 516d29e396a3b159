#pragma once

// Kernel (Gram) matrices between sampling patterns and the interpolation
// weights derived from them.
//
// Conventions: <u, v> = sum conj(u) v, image -> k-space DFT sign is negative,
// and the encoding function of z = (x, j) is eps_z(r) = conj(c_j(r)) e^{+2 pi i x.r/N}.
// Then M_ab = <eps_a, eps_b> = DFT{c_ja conj(c_jb)}(x_a - x_b), looked up in a
// table of C^2 arrays with offsets wrapped modulo the grid extents.
//
// With this M, the interpolant onto S_B of data y on S_A is M_BA (M_AA + lI)^-1 y.
// Weights are stored so that reconstruction reads W^T y:
//   W(S_A, S_B) = conj((M_AA + lI)^-1 M_AB).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kcrime/coils.hpp"
#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"

namespace kcrime {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct CoilProductTable {
  GridSpec grid;
  /// table[a * C + b](delta) = DFT{c_a * conj(c_b)}(delta).
  std::vector<CArray> table;

  const CArray& at(int a, int b) const { return table[static_cast<std::size_t>(a * grid.coils + b)]; }
};

/// Only a <= b is transformed; the rest follows from
/// table[b][a](d) = conj(table[a][b](-d)), which keeps M(S_B,S_A) = M(S_A,S_B)^H exact.
inline CoilProductTable build_tables(const CoilModel& coils) {
  const int C = coils.coils();
  const auto& g = coils.grid;
  const auto n = static_cast<std::size_t>(g.locations());
  std::vector<std::size_t> neg(n);
  for (Index l = 0; l < g.locations(); ++l) {
    auto k = g.unravel(l);
    for (std::size_t d = 0; d < k.size(); ++d) k[d] = (g.dims[d] - k[d]) % g.dims[d];
    neg[static_cast<std::size_t>(l)] = static_cast<std::size_t>(g.linear(k));
  }
  CoilProductTable t{g, std::vector<CArray>(static_cast<std::size_t>(C) * C)};
  for (int a = 0; a < C; ++a)
    for (int b = a; b < C; ++b) {
      CArray prod(n);
      for (std::size_t i = 0; i < n; ++i) prod[i] = coils.map(a)[i] * std::conj(coils.map(b)[i]);
      CArray ab = dft(std::move(prod), g.dims);
      if (a == b) {
        CArray sym(n);
        for (std::size_t i = 0; i < n; ++i) sym[i] = 0.5 * (ab[i] + std::conj(ab[neg[i]]));
        ab = std::move(sym);
      }
      CArray ba(n);
      for (std::size_t i = 0; i < n; ++i) ba[i] = std::conj(ab[neg[i]]);
      t.table[static_cast<std::size_t>(a * C + b)] = std::move(ab);
      t.table[static_cast<std::size_t>(b * C + a)] = std::move(ba);
    }
  return t;
}

struct KernelMatrix {
  SamplingPattern rows;
  SamplingPattern cols;
  Matrix data;

  bool square() const { return rows.same_points(cols); }
};

namespace detail {

inline void require_grid(const GridSpec& expected, const SamplingPattern& p, const char* what) {
  if (p.grid() != expected)
    throw GridMismatch(std::string(what) + " pattern grid " + p.grid().to_string() + " does not match coil grid " +
                       expected.to_string());
}

}  // namespace detail

/// M(S_A, S_B): one table lookup per entry.
inline KernelMatrix kernel_matrix(const CoilProductTable& tables, const SamplingPattern& a, const SamplingPattern& b) {
  detail::require_grid(tables.grid, a, "row");
  detail::require_grid(tables.grid, b, "column");
  const auto& grid = tables.grid;
  const std::size_t nd = grid.ndims();
  const auto strides = grid.strides();
  const auto na = static_cast<Index>(a.size());
  const auto nb = static_cast<Index>(b.size());

  // Column-major friendly: walk columns in the outer loop.
  KernelMatrix km{a, b, Matrix(na, nb)};
  for (Index j = 0; j < nb; ++j) {
    const auto& pb = b[static_cast<std::size_t>(j)];
    for (Index i = 0; i < na; ++i) {
      const auto& pa = a[static_cast<std::size_t>(i)];
      Index off = 0;
      for (std::size_t d = 0; d < nd; ++d) {
        int delta = pa.kidx[d] - pb.kidx[d];
        if (delta < 0) delta += grid.dims[d];
        off += delta * strides[d];
      }
      km.data(i, j) = tables.at(pa.coil, pb.coil)[static_cast<std::size_t>(off)];
    }
  }
  return km;
}

/// 1e-6 times the average eigenvalue (trace / n). Zero for a zero matrix.
inline double default_lambda(const KernelMatrix& m) {
  if (m.data.rows() != m.data.cols()) throw UsageError("default_lambda needs a square kernel matrix");
  if (m.data.rows() == 0) return 0.0;
  return 1e-6 * m.data.trace().real() / static_cast<double>(m.data.rows());
}

/// Same rule for M(S_all, S_all) without assembling it: trace/n is the mean of
/// table[j][j](0) over coils.
inline double default_lambda(const CoilProductTable& tables) {
  double sum = 0.0;
  for (int j = 0; j < tables.grid.coils; ++j) sum += tables.at(j, j)[0].real();
  return 1e-6 * sum / tables.grid.coils;
}

struct WeightSet {
  SamplingPattern src;
  SamplingPattern dst;
  /// |src| x |dst|; reconstruction on dst is W^T y.
  Matrix W;
  double lambda = 0.0;
  std::optional<std::size_t> rank;
};

/// Factorization of M(S_A, S_A) + lambda I, reusable for several targets.
/// Without a rank, a Cholesky factorization; with a rank, a truncated
/// eigendecomposition keeping the `rank` largest modes (a pseudoinverse when
/// lambda is zero).
class WeightSolver {
 public:
  WeightSolver(const KernelMatrix& gram, double lambda, std::optional<std::size_t> rank = std::nullopt)
      : src_(gram.rows), lambda_(lambda), rank_(rank) {
    if (!gram.square()) throw UsageError("weight solve needs M(S_A, S_A)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and >= 0");
    const Index n = gram.data.rows();
    if (n == 0) throw UsageError("weight solve needs a nonempty source pattern");
    if (rank) {
      if (*rank == 0) throw UsageError("truncation rank must be >= 1");
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram.data);
      if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of the kernel matrix failed");
      const auto& mu = es.eigenvalues();  // ascending
      const double top = std::max(std::abs(mu(n - 1)), std::numeric_limits<double>::min());
      const double floor = lambda > 0.0 ? 0.0 : 1e-12 * top;
      Index keep = 0;
      while (keep < n && static_cast<std::size_t>(keep) < *rank && mu(n - 1 - keep) > floor) ++keep;
      if (keep == 0) throw NumericError("kernel matrix has no positive eigenvalues");
      basis_ = es.eigenvectors().rightCols(keep);
      inv_ = (mu.tail(keep).array() + lambda).inverse().matrix().cast<Complex>();
    } else {
      Matrix a = gram.data;
      a.diagonal().array() += lambda;
      Eigen::LLT<Matrix> llt(a);
      if (llt.info() != Eigen::Success) throw not_positive_definite();
      const auto diag = llt.matrixLLT().diagonal().real().array().square();
      if (diag.minCoeff() <= static_cast<double>(n) * std::numeric_limits<double>::epsilon() * diag.maxCoeff())
        throw not_positive_definite();
      llt_ = std::move(llt);
    }
  }

  /// W(S_A, S_B) from M(S_A, S_B).
  WeightSet solve(KernelMatrix cross) const {
    if (!cross.rows.same_points(src_)) throw UsageError("cross kernel rows do not match the source pattern");
    Matrix x = std::move(cross.data);
    if (rank_) {
      x = basis_ * (inv_.asDiagonal() * (basis_.adjoint() * x));
    } else {
      llt_->solveInPlace(x);
    }
    x.array() = x.array().conjugate();
    return WeightSet{src_, std::move(cross.cols), std::move(x), lambda_, rank_};
  }

  const SamplingPattern& source() const { return src_; }

 private:
  NumericError not_positive_definite() const {
    return NumericError("kernel matrix M(" + src_.label() + ") is numerically singular at lambda=" +
                        std::to_string(lambda_) + "; use lambda > 0 or a rank truncation");
  }

  SamplingPattern src_;
  double lambda_;
  std::optional<std::size_t> rank_;
  std::optional<Eigen::LLT<Matrix>> llt_;
  Matrix basis_;
  Vector inv_;
};

inline WeightSet weights(const CoilProductTable& tables, const SamplingPattern& src, const SamplingPattern& dst,
                         double lambda, std::optional<std::size_t> rank = std::nullopt) {
  WeightSolver solver(kernel_matrix(tables, src, src), lambda, rank);
  return solver.solve(kernel_matrix(tables, src, dst));
}

}  // namespace kcrime
