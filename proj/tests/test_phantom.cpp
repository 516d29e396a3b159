#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kcrime/coils.hpp"
#include "kcrime/oracle.hpp"
#include "kcrime/phantom.hpp"
#include "kcrime/recon.hpp"

using namespace kcrime;

namespace {

double max_abs(const CArray& a) {
  double m = 0.0;
  for (const auto& v : a) m = std::max(m, std::abs(v));
  return m;
}

Complex inner(const CArray& a, const CArray& b) {
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5), c(6);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(Rng, ComplexNormalHasRequestedVariance) {
  Rng r(17);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += std::norm(r.complex_normal(2.5));
  EXPECT_NEAR(s / n, 2.5, 0.05);
}

TEST(Coils, OrderZeroIsConstant) {
  const auto c = make_coils(GridSpec({8, 8}, 3), 0, 4);
  for (int j = 0; j < 3; ++j)
    for (const auto& v : c.map(j)) EXPECT_NEAR(std::abs(v - c.map(j)[0]), 0.0, 1e-14);
}

TEST(Coils, UnitCoilIsOne) {
  const auto c = unit_coil({4, 4});
  EXPECT_EQ(c.coils(), 1);
  for (const auto& v : c.map(0)) EXPECT_EQ(v, Complex(1.0, 0.0));
}

TEST(Coils, StandardMapsAreIndependent) {
  const auto c = make_coils(GridSpec({32, 32}, 4), 3, 1);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const double nab = std::abs(inner(c.map(a), c.map(b)));
      const double na = std::sqrt(inner(c.map(a), c.map(a)).real());
      const double nb = std::sqrt(inner(c.map(b), c.map(b)).real());
      EXPECT_LT(nab / (na * nb), 0.99) << a << "," << b;
    }
}

TEST(Coils, CoefficientsReproduceMaps) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = make_coils(GridSpec({32, 32}, 4), 3, seed);
    EXPECT_LE(coefficient_reproduction_error(c), 1e-12);
  }
}

TEST(Coils, DeterministicInSeed) {
  const GridSpec g({16, 16}, 2);
  EXPECT_EQ(make_coils(g, 2, 9).maps, make_coils(g, 2, 9).maps);
  EXPECT_NE(make_coils(g, 2, 9).maps, make_coils(g, 2, 10).maps);
}

TEST(Coils, RejectsAliasedOrderAndZeroMaps) {
  EXPECT_THROW(make_coils(GridSpec({4, 4}, 1), 2, 1), UsageError);
  EXPECT_THROW(coils_from_maps(GridSpec({2, 2}, 1), {CArray(4)}), UsageError);
  EXPECT_THROW(coils_from_maps(GridSpec({2, 2}, 1), {CArray(3, Complex{1.0, 0.0})}), UsageError);
}

TEST(DiscretePhantom, ZeroImageGivesZeroKSpace) {
  const auto c = make_coils(GridSpec({8, 8}, 2), 1, 3);
  const auto gt = make_phantom_discrete(c, CArray(64));
  for (const auto& ks : gt.coil_kspace) EXPECT_EQ(max_abs(ks), 0.0);
  EXPECT_EQ(gt.rho_l2, 0.0);
}

TEST(DiscretePhantom, DeltaWithUnitCoilIsFlat) {
  const auto c = unit_coil({4, 4});
  CArray rho(16);
  rho[0] = 1.0;
  const auto gt = make_phantom_discrete(c, rho);
  for (const auto& v : gt.coil_kspace[0]) EXPECT_NEAR(std::abs(v - Complex(1.0, 0.0)), 0.0, 1e-14);
}

TEST(DiscretePhantom, SeededEllipsesAreReproducible) {
  const auto c = make_coils(GridSpec({32, 32}, 4), 3, 1);
  const auto a = make_phantom_discrete(c, 12, 4);
  const auto b = make_phantom_discrete(c, 12, 4);
  ASSERT_TRUE(a.rho.has_value());
  EXPECT_GT(a.rho_l2, 0.0);
  EXPECT_EQ(a.coil_kspace, b.coil_kspace);
  EXPECT_NEAR(a.rho_l2, std::sqrt(inner(*a.rho, *a.rho).real()), 1e-12 * a.rho_l2);
}

// Full-grid samples equal <eps_z, rho> with explicitly built encoding vectors.
TEST(DiscretePhantom, SamplesAreFeatureMapEvaluations) {
  const GridSpec g({4, 4}, 2);
  const auto c = make_coils(g, 1, 8);
  const auto rho = random_image(g, 3);
  const auto gt = make_phantom_discrete(c, rho);
  const auto all = full_grid(g);
  const auto es = oracle::encoding_set(c, all);
  const Vector r = Eigen::Map<const Vector>(rho.data(), static_cast<Index>(rho.size()));
  const Vector f = es.vectors.adjoint() * r;
  double scale = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Complex v = gt.at(all.location(i), all[i].coil);
    scale = std::max(scale, std::abs(v));
    dev = std::max(dev, std::abs(v - f(static_cast<Index>(i))));
  }
  EXPECT_LE(dev, 1e-12 * scale);
}

TEST(AnalyticPhantom, CenteredDiskIsReal) {
  const auto c = unit_coil({16, 16});
  const std::vector<Ellipse> disk{{{0.0, 0.0}, {0.3, 0.3}, 0.0, {1.0, 0.0}}};
  const auto gt = make_phantom_analytic(c, disk);
  const double scale = max_abs(gt.coil_kspace[0]);
  for (const auto& v : gt.coil_kspace[0]) EXPECT_LE(std::abs(v.imag()), 1e-12 * scale);
  // Radial symmetry: (k0, k1) and (k1, k0) and (-k0, k1) agree.
  const GridSpec g({16, 16}, 1);
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      const auto v = gt.at(g.linear({a, b}), 0);
      EXPECT_NEAR(std::abs(v - gt.at(g.linear({b, a}), 0)), 0.0, 1e-10 * scale);
      EXPECT_NEAR(std::abs(v - gt.at(g.linear({(16 - a) % 16, b}), 0)), 0.0, 1e-10 * scale);
    }
}

TEST(AnalyticPhantom, ShiftAddsLinearPhase) {
  const auto c = unit_coil({16, 16});
  const Ellipse base{{0.0, 0.0}, {0.2, 0.1}, 0.4, {1.0, 0.5}};
  Ellipse moved = base;
  moved.center[0] = 0.13;
  moved.center[1] = -0.07;
  const auto a = make_phantom_analytic(c, std::vector<Ellipse>{base});
  const auto b = make_phantom_analytic(c, std::vector<Ellipse>{moved});
  const GridSpec g({16, 16}, 1);
  const double scale = max_abs(a.coil_kspace[0]);
  for (Index l = 0; l < g.locations(); ++l) {
    const auto k = g.unravel(l);
    const double k0 = signed_frequency(k[0], 16), k1 = signed_frequency(k[1], 16);
    const Complex phase = std::polar(1.0, -2.0 * std::numbers::pi * (k0 * 0.13 + k1 * -0.07));
    EXPECT_LE(std::abs(b.at(l, 0) - a.at(l, 0) * phase), 1e-10 * scale);
  }
}

TEST(AnalyticPhantom, LinearInEllipses) {
  const auto c = make_coils(GridSpec({16, 16}, 2), 2, 5);
  const Ellipse e1{{-0.2, 0.0}, {0.1, 0.15}, 0.0, {1.0, 0.0}};
  const Ellipse e2{{0.2, 0.1}, {0.12, 0.08}, 1.0, {0.0, 2.0}};
  const auto both = make_phantom_analytic(c, std::vector<Ellipse>{e1, e2});
  const auto one = make_phantom_analytic(c, std::vector<Ellipse>{e1});
  const auto two = make_phantom_analytic(c, std::vector<Ellipse>{e2});
  for (int j = 0; j < 2; ++j) {
    const double scale = max_abs(both.coil_kspace[static_cast<std::size_t>(j)]);
    for (std::size_t i = 0; i < both.coil_kspace[0].size(); ++i)
      EXPECT_LE(std::abs(both.coil_kspace[static_cast<std::size_t>(j)][i] -
                         one.coil_kspace[static_cast<std::size_t>(j)][i] -
                         two.coil_kspace[static_cast<std::size_t>(j)][i]),
                1e-10 * scale);
  }
  // rho_l2 is the closed-form energy of disjoint ellipses.
  EXPECT_NEAR(both.rho_l2 * both.rho_l2, one.rho_l2 * one.rho_l2 + two.rho_l2 * two.rho_l2, 1e-10 * both.rho_l2 * both.rho_l2);
}

TEST(AnalyticPhantom, ImageMatchesEllipseLayout) {
  const GridSpec g({32, 32}, 4);
  const auto c = make_coils(g, 3, 1);
  const auto es = seeded_ellipses(21, 3);
  const auto gt = make_phantom_analytic(c, es);
  ReconResult r;
  r.grid = g;
  r.kspace_full = gt.coil_kspace;
  combine_coils(c, r);
  const auto raster = rasterize(g.dims, es);
  const double corr = std::abs(inner(r.image, raster)) /
                      std::sqrt(inner(r.image, r.image).real() * inner(raster, raster).real());
  EXPECT_GT(corr, 0.9);
}

TEST(AnalyticPhantom, RejectsDiscreteCoilsAndOverlaps) {
  const GridSpec g({8, 8}, 1);
  const auto disc = coils_from_maps(g, {CArray(64, Complex{1.0, 0.0})});
  EXPECT_THROW(make_phantom_analytic(disc, default_ellipses()), UsageError);
  const std::vector<Ellipse> overlap{{{0.0, 0.0}, {0.2, 0.2}, 0.0, {1.0, 0.0}}, {{0.1, 0.0}, {0.2, 0.2}, 0.0, {1.0, 0.0}}};
  EXPECT_THROW(make_phantom_analytic(unit_coil({8, 8}), overlap), UsageError);
}

TEST(Acquire, NoiselessIsExactLookup) {
  const GridSpec g({8, 8}, 2);
  const auto c = make_coils(g, 1, 2);
  const auto gt = make_phantom_discrete(c, 4, 3);
  const auto p = random_pattern(g, 2, 1);
  const auto d = acquire(gt, p, std::nullopt, 0);
  ASSERT_EQ(d.values.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(d.values[i], gt.at(p.location(i), p[i].coil));
}

TEST(Acquire, StandardSnrWithinHalfDecibel) {
  const GridSpec g({32, 32}, 4);
  const auto c = make_coils(g, 3, 1);
  const auto gt = make_phantom_analytic(c, default_ellipses());
  const auto all = full_grid(g);
  const double ps = signal_power(gt);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = acquire(gt, all, 35.0, seed);
    double pn = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) pn += std::norm(d.values[i] - gt.at(all.location(i), all[i].coil));
    pn /= static_cast<double>(all.size());
    EXPECT_NEAR(10.0 * std::log10(ps / pn), 35.0, 0.5) << "seed " << seed;
  }
}

TEST(Acquire, RejectsInfiniteSnr) {
  const auto c = unit_coil({4, 4});
  const auto gt = make_phantom_discrete(c, random_image(c.grid, 1));
  EXPECT_THROW(acquire(gt, full_grid(c.grid), std::numeric_limits<double>::infinity(), 1), UsageError);
  EXPECT_THROW(acquire(gt, full_grid(c.grid), std::nan(""), 1), UsageError);
}

TEST(Acquire, SameSeedIsBitReproducible) {
  const auto c = make_coils(GridSpec({8, 8}, 2), 1, 2);
  const auto gt = make_phantom_discrete(c, 4, 3);
  const auto p = full_grid(c.grid);
  EXPECT_EQ(acquire(gt, p, 20.0, 99).values, acquire(gt, p, 20.0, 99).values);
  EXPECT_NE(acquire(gt, p, 20.0, 99).values, acquire(gt, p, 20.0, 98).values);
}

TEST(Acquire, GridMismatchIsRejected) {
  const auto c = make_coils(GridSpec({8, 8}, 2), 1, 2);
  const auto gt = make_phantom_discrete(c, 4, 3);
  EXPECT_THROW(acquire(gt, full_grid(GridSpec({8, 8}, 3)), std::nullopt, 0), GridMismatch);
}
