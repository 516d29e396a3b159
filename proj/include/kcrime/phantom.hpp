#pragma once

// Ground-truth multi-coil k-space in two flavours.
//
// discrete: rho lives on the pixel grid and coil_kspace[j] = DFT(c_j * rho),
//   so every sample is exactly <eps_z, rho> for the discrete encoding
//   functions. Used wherever a test needs the data to sit inside the RKHS.
// analytic: rho is a sum of ellipses given in closed form in k-space and
//   multiplied by bandlimited coils through their Fourier coefficients, so no
//   pixel-domain model is involved when the data are generated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "kcrime/coils.hpp"
#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/rng.hpp"

namespace kcrime {

/// Constant-amplitude ellipse in FOV units (the FOV is [-1/2, 1/2)^2).
struct Ellipse {
  double center[2] = {0.0, 0.0};
  double axes[2] = {0.1, 0.1};
  double angle = 0.0;
  Complex amplitude{1.0, 0.0};
};

namespace detail {

inline double wrap_unit(double u) { return u - std::floor(u + 0.5); }

inline bool ellipses_disjoint(std::span<const Ellipse> es) {
  for (std::size_t i = 0; i < es.size(); ++i) {
    const double ri = std::max(es[i].axes[0], es[i].axes[1]);
    if (std::hypot(es[i].center[0], es[i].center[1]) + ri >= 0.5) return false;
    for (std::size_t j = 0; j < i; ++j) {
      const double rj = std::max(es[j].axes[0], es[j].axes[1]);
      const double dist = std::hypot(es[i].center[0] - es[j].center[0], es[i].center[1] - es[j].center[1]);
      if (dist <= ri + rj) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Continuous Fourier transform of one ellipse at frequency k (cycles per FOV),
/// rho_hat(k) = integral rho(u) exp(-2 pi i k.u) du.
inline Complex ellipse_transform(const Ellipse& e, double k0, double k1) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double q0 = e.axes[0] * (c * k0 + s * k1);
  const double q1 = e.axes[1] * (-s * k0 + c * k1);
  const double q = std::hypot(q0, q1);
  const double area_factor = e.axes[0] * e.axes[1];
  const double shape = q < 1e-12 ? std::numbers::pi : std::cyl_bessel_j(1.0, 2.0 * std::numbers::pi * q) / q;
  const Complex shift = std::polar(1.0, -2.0 * std::numbers::pi * (k0 * e.center[0] + k1 * e.center[1]));
  return e.amplitude * shift * (area_factor * shape);
}

/// Point-samples the ellipse indicators at pixel positions u = n/N (wrapped).
inline CArray rasterize(const std::vector<int>& dims, std::span<const Ellipse> es) {
  if (dims.size() != 2) throw UsageError("ellipse phantoms need a 2D grid");
  CArray img(static_cast<std::size_t>(dims[0]) * dims[1]);
  for (int n0 = 0; n0 < dims[0]; ++n0)
    for (int n1 = 0; n1 < dims[1]; ++n1) {
      Complex v{};
      for (const auto& e : es) {
        const double d0 = detail::wrap_unit(static_cast<double>(n0) / dims[0] - e.center[0]);
        const double d1 = detail::wrap_unit(static_cast<double>(n1) / dims[1] - e.center[1]);
        const double c = std::cos(e.angle), s = std::sin(e.angle);
        const double x = (c * d0 + s * d1) / e.axes[0];
        const double y = (-s * d0 + c * d1) / e.axes[1];
        if (x * x + y * y <= 1.0) v += e.amplitude;
      }
      img[static_cast<std::size_t>(n0) * dims[1] + n1] = v;
    }
  return img;
}

/// Fixed layout used by the shipped presets: four disjoint ellipses.
inline std::vector<Ellipse> default_ellipses() {
  return {
      {{-0.17, -0.12}, {0.20, 0.12}, 0.35, {1.0, 0.0}},
      {{0.20, 0.05}, {0.09, 0.16}, -0.2, {0.7, 0.3}},
      {{-0.05, 0.25}, {0.10, 0.06}, 0.9, {0.5, -0.4}},
      {{0.12, -0.27}, {0.07, 0.07}, 0.0, {1.3, 0.0}},
  };
}

/// Seeded, pairwise disjoint ellipses with random complex amplitudes.
inline std::vector<Ellipse> seeded_ellipses(std::uint64_t seed, int count = 4) {
  Rng rng(seed);
  std::vector<Ellipse> out;
  for (int tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > 10000) throw NumericError("could not place disjoint ellipses");
    Ellipse e;
    e.center[0] = rng.uniform(-0.3, 0.3);
    e.center[1] = rng.uniform(-0.3, 0.3);
    e.axes[0] = rng.uniform(0.06, 0.16);
    e.axes[1] = rng.uniform(0.06, 0.16);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    e.amplitude = std::polar(rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * std::numbers::pi));
    out.push_back(e);
    if (!detail::ellipses_disjoint(out)) out.pop_back();
  }
  return out;
}

/// Seeded complex Gaussian image (for sweeps over arbitrary in-span data).
inline CArray random_image(const GridSpec& grid, std::uint64_t seed) {
  Rng rng(seed);
  CArray img(static_cast<std::size_t>(grid.locations()));
  for (auto& v : img) v = rng.complex_normal();
  return img;
}

enum class PhantomMode { discrete, analytic };

struct GroundTruth {
  GridSpec grid;
  PhantomMode mode = PhantomMode::discrete;
  /// Pixel image (discrete mode only).
  std::optional<CArray> rho;
  /// f_j(x) on the full grid, one row-major array per coil.
  std::vector<CArray> coil_kspace;
  /// ||rho||_2 (discrete), or sqrt(prod N * integral |rho|^2) (analytic).
  double rho_l2 = 0.0;

  Complex at(Index location, int coil) const {
    return coil_kspace[static_cast<std::size_t>(coil)][static_cast<std::size_t>(location)];
  }
};

inline GroundTruth make_phantom_discrete(const CoilModel& coils, CArray rho) {
  if (rho.size() != static_cast<std::size_t>(coils.grid.locations()))
    throw UsageError("image does not match the coil grid");
  GroundTruth gt;
  gt.grid = coils.grid;
  gt.mode = PhantomMode::discrete;
  double norm2 = 0.0;
  for (const auto& v : rho) norm2 += std::norm(v);
  gt.rho_l2 = std::sqrt(norm2);
  for (int j = 0; j < coils.coils(); ++j) {
    CArray weighted(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) weighted[i] = coils.map(j)[i] * rho[i];
    gt.coil_kspace.push_back(dft(std::move(weighted), coils.grid.dims));
  }
  gt.rho = std::move(rho);
  return gt;
}

/// Rasterized seeded ellipses on the pixel grid.
inline GroundTruth make_phantom_discrete(const CoilModel& coils, std::uint64_t seed, int count = 4) {
  const auto es = seeded_ellipses(seed, count);
  return make_phantom_discrete(coils, rasterize(coils.grid.dims, es));
}

/// coil_kspace[j](k) = prod N * sum_m gamma_{j,m} rho_hat(k - m), k taken as
/// signed frequencies. The prod N factor matches the unnormalized DFT scale of
/// the discrete mode.
inline GroundTruth make_phantom_analytic(const CoilModel& coils, std::span<const Ellipse> ellipses) {
  if (coils.mode != CoilMode::bandlimited) throw UsageError("analytic phantom needs bandlimited coils");
  if (coils.grid.ndims() != 2) throw UsageError("ellipse phantoms need a 2D grid");
  if (!detail::ellipses_disjoint(ellipses))
    throw UsageError("analytic phantom needs disjoint ellipses inside the field of view");
  const auto& dims = coils.grid.dims;
  const int L = coils.order;
  const int width = 2 * L + 1;
  const double scale = static_cast<double>(coils.grid.locations());

  GroundTruth gt;
  gt.grid = coils.grid;
  gt.mode = PhantomMode::analytic;
  double energy = 0.0;
  for (const auto& e : ellipses) energy += std::norm(e.amplitude) * std::numbers::pi * e.axes[0] * e.axes[1];
  gt.rho_l2 = std::sqrt(scale * energy);

  // rho_hat on the shifted frequencies k - m is shared by all coils.
  const int ext0 = dims[0] + 2 * L, ext1 = dims[1] + 2 * L;
  CArray rho_hat(static_cast<std::size_t>(ext0) * ext1);
  std::vector<int> f0(static_cast<std::size_t>(dims[0])), f1(static_cast<std::size_t>(dims[1]));
  for (int k = 0; k < dims[0]; ++k) f0[static_cast<std::size_t>(k)] = signed_frequency(k, dims[0]);
  for (int k = 0; k < dims[1]; ++k) f1[static_cast<std::size_t>(k)] = signed_frequency(k, dims[1]);
  const int min0 = *std::min_element(f0.begin(), f0.end()) - L;
  const int min1 = *std::min_element(f1.begin(), f1.end()) - L;
  for (int a = 0; a < ext0; ++a)
    for (int b = 0; b < ext1; ++b) {
      Complex v{};
      for (const auto& e : ellipses) v += ellipse_transform(e, min0 + a, min1 + b);
      rho_hat[static_cast<std::size_t>(a) * ext1 + b] = v;
    }

  for (int j = 0; j < coils.coils(); ++j) {
    const auto& gamma = coils.coefficients[static_cast<std::size_t>(j)];
    CArray ks(static_cast<std::size_t>(dims[0]) * dims[1]);
    for (int k0 = 0; k0 < dims[0]; ++k0)
      for (int k1 = 0; k1 < dims[1]; ++k1) {
        Complex acc{};
        for (int m0 = -L; m0 <= L; ++m0)
          for (int m1 = -L; m1 <= L; ++m1) {
            const int a = f0[static_cast<std::size_t>(k0)] - m0 - min0;
            const int b = f1[static_cast<std::size_t>(k1)] - m1 - min1;
            acc += gamma[static_cast<std::size_t>((m0 + L) * width + (m1 + L))] *
                   rho_hat[static_cast<std::size_t>(a) * ext1 + b];
          }
        ks[static_cast<std::size_t>(k0) * dims[1] + k1] = scale * acc;
      }
    gt.coil_kspace.push_back(std::move(ks));
  }
  return gt;
}

struct AcquiredData {
  SamplingPattern pattern;
  /// One value per pattern point, same order.
  CArray values;
  std::uint64_t noise_seed = 0;
  std::optional<double> snr_db;
  double noise_variance = 0.0;
};

/// Mean |f|^2 over every coil and location of the full grid.
inline double signal_power(const GroundTruth& gt) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ks : gt.coil_kspace) {
    for (const auto& v : ks) sum += std::norm(v);
    n += ks.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Samples gt on `pattern`, adding circular Gaussian noise so that
/// 10 log10(signal_power / sigma^2) = snr_db. No snr means noiseless.
inline AcquiredData acquire(const GroundTruth& gt, const SamplingPattern& pattern, std::optional<double> snr_db,
                            std::uint64_t seed) {
  if (pattern.grid() != gt.grid)
    throw GridMismatch("pattern grid " + pattern.grid().to_string() + " does not match ground truth grid " +
                       gt.grid.to_string());
  if (snr_db && !std::isfinite(*snr_db)) throw UsageError("SNR must be finite; omit it for noiseless data");
  AcquiredData out{pattern, CArray(pattern.size()), seed, snr_db, 0.0};
  for (std::size_t i = 0; i < pattern.size(); ++i) out.values[i] = gt.at(pattern.location(i), pattern[i].coil);
  if (snr_db) {
    out.noise_variance = signal_power(gt) / std::pow(10.0, *snr_db / 10.0);
    Rng rng(seed);
    for (auto& v : out.values) v += rng.complex_normal(out.noise_variance);
  }
  return out;
}

}  // namespace kcrime
