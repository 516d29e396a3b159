#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>

#include "kcrime/crime.hpp"
#include "kcrime/recon.hpp"

using namespace kcrime;

// Regression pins, frozen from the first run of this build on the 32x32x4 setup below.
constexpr double kDeltaWFrobenius = 0.0018575720495679383;
constexpr double kLsqRandomR4Nrmse = 0.063225234599452271;

namespace {

struct ReferencePair {
  CoilModel coils = make_coils(GridSpec({32, 32}, 4), 3, 1);
  CoilProductTable tables = build_tables(coils);
  double lambda = default_lambda(tables);
  SamplingPattern pro = uniform_pattern(coils.grid, 2, 0);
  SamplingPattern retro = uniform_pattern(coils.grid, 3, 0);
  KernelMatrix m_pro = kernel_matrix(tables, pro, pro);
  CrimeOperator op = delta_w(tables, m_pro, retro, full_grid(coils.grid), lambda);
  PowerMap pm = power_map(op, m_pro);
};

const ReferencePair& reference_pair() {
  static const ReferencePair p;
  return p;
}

}  // namespace

TEST(ReferencePair, DeltaWNormIsPinned) {
  const auto& p = reference_pair();
  const double fro = p.op.dW.norm();
  std::cout << "dW frobenius " << std::setprecision(17) << fro << '\n';
  EXPECT_GT(fro, 0.0);
  EXPECT_NEAR(fro, kDeltaWFrobenius, 1e-9 * kDeltaWFrobenius);
}

TEST(ReferencePair, ErrorMagnitudeTracksPower) {
  const auto& p = reference_pair();
  const auto gt = make_phantom_analytic(p.coils, default_ellipses());
  const Vector err = experiment_error(p.op, acquire(gt, p.pro, 35.0, 7));
  std::vector<double> mag(static_cast<std::size_t>(err.size()));
  for (Index i = 0; i < err.size(); ++i) mag[static_cast<std::size_t>(i)] = std::abs(err[i]);
  const double rs = spearman(mag, p.pm.p2);
  std::cout << "spearman " << rs << '\n';
  EXPECT_GT(rs, 0.0);
}

TEST(ReferencePair, DiscreteBoundHolds) {
  const auto& p = reference_pair();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto gt = make_phantom_discrete(p.coils, random_image(p.coils.grid, seed));
    const auto rep = verify_bound(p.op, p.m_pro, gt, 1e-8 * bound_scale(p.m_pro, gt.rho_l2));
    EXPECT_TRUE(rep.pass) << "seed " << seed << " violation " << rep.max_violation;
  }
}

TEST(ReferenceLsq, RandomRFourNrmseIsPinned) {
  const auto c = make_coils(GridSpec({32, 32}, 4), 3, 1);
  const auto gt = make_phantom_discrete(c, 1, 4);
  const auto r = lsq_reconstruct(c, acquire(gt, random_pattern(c.grid, 4, 7), std::nullopt, 0));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.image.size(); ++i) {
    num += std::norm(r.image[i] - (*gt.rho)[i]);
    den += std::norm((*gt.rho)[i]);
  }
  const double nrmse = std::sqrt(num / den);
  std::cout << "lsq nrmse " << std::setprecision(17) << nrmse << " converged " << r.converged << '\n';
  ASSERT_TRUE(std::isfinite(nrmse));
  EXPECT_NEAR(nrmse, kLsqRandomR4Nrmse, 1e-6 * kLsqRandomR4Nrmse);
}
