#pragma once

// Coil sensitivity models. Maps live on the pixel grid; the pixel at index n
// sits at FOV coordinate u = n / N (periodic, so u wraps into [-1/2, 1/2)).
// Bandlimited coils also keep their Fourier-series coefficients
//   c_j(u) = sum_{m in [-L,L]^d} gamma_{j,m} exp(+2 pi i m.u)
// which the analytic phantom needs to stay off the pixel grid.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/rng.hpp"

namespace kcrime {

enum class CoilMode { discrete, bandlimited };

struct CoilModel {
  GridSpec grid;
  std::vector<CArray> maps;
  CoilMode mode = CoilMode::discrete;
  /// Series order L (bandlimited only).
  int order = -1;
  /// Per coil, (2L+1)^ndims coefficients, row-major over m_d = -L..L.
  std::vector<CArray> coefficients;

  int coils() const { return grid.coils; }
  const CArray& map(int j) const { return maps[static_cast<std::size_t>(j)]; }
};

namespace detail {

inline void validate_maps(const GridSpec& grid, const std::vector<CArray>& maps) {
  if (maps.size() != static_cast<std::size_t>(grid.coils))
    throw UsageError("expected " + std::to_string(grid.coils) + " coil maps, got " + std::to_string(maps.size()));
  for (std::size_t j = 0; j < maps.size(); ++j) {
    if (maps[j].size() != static_cast<std::size_t>(grid.locations()))
      throw UsageError("coil map " + std::to_string(j) + " does not match the grid shape");
    bool nonzero = false;
    for (const auto& v : maps[j]) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw UsageError("coil map " + std::to_string(j) + " has non-finite values");
      nonzero = nonzero || v != Complex{};
    }
    if (!nonzero) throw UsageError("coil map " + std::to_string(j) + " is identically zero");
  }
}

inline Index series_size(int order, std::size_t ndims) {
  Index n = 1;
  for (std::size_t d = 0; d < ndims; ++d) n *= 2 * order + 1;
  return n;
}

/// exp(2 pi i m n / N) with the product reduced mod N first.
inline Complex grid_phase(long m, long n, long N) {
  long r = (m * n) % N;
  if (r < 0) r += N;
  const double t = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(N);
  return {std::cos(t), std::sin(t)};
}

inline CArray evaluate_series(const GridSpec& grid, int order, const CArray& coeffs) {
  const std::size_t nd = grid.ndims();
  const Index terms = series_size(order, nd);
  CArray out(static_cast<std::size_t>(grid.locations()));
  std::vector<int> m(nd);
  for (Index loc = 0; loc < grid.locations(); ++loc) {
    const auto n = grid.unravel(loc);
    Complex acc{};
    for (Index t = 0; t < terms; ++t) {
      Index rest = t;
      for (std::size_t d = nd; d-- > 0;) {
        m[d] = static_cast<int>(rest % (2 * order + 1)) - order;
        rest /= 2 * order + 1;
      }
      Complex ph{1.0, 0.0};
      for (std::size_t d = 0; d < nd; ++d) ph *= grid_phase(m[d], n[d], grid.dims[d]);
      acc += coeffs[static_cast<std::size_t>(t)] * ph;
    }
    out[static_cast<std::size_t>(loc)] = acc;
  }
  return out;
}

}  // namespace detail

/// Arbitrary pixel-domain maps.
inline CoilModel coils_from_maps(const GridSpec& grid, std::vector<CArray> maps) {
  grid.validate();
  detail::validate_maps(grid, maps);
  return CoilModel{grid, std::move(maps), CoilMode::discrete, -1, {}};
}

/// Bandlimited maps from Fourier-series coefficients of order L.
inline CoilModel bandlimited_coils(const GridSpec& grid, int order, std::vector<CArray> coefficients) {
  grid.validate();
  if (order < 0) throw UsageError("coil series order must be >= 0");
  for (int d : grid.dims)
    if (2 * order >= d && d > 1) throw UsageError("coil series order too high for grid extent " + std::to_string(d));
  if (coefficients.size() != static_cast<std::size_t>(grid.coils))
    throw UsageError("expected one coefficient set per coil");
  const auto terms = static_cast<std::size_t>(detail::series_size(order, grid.ndims()));
  std::vector<CArray> maps;
  for (const auto& c : coefficients) {
    if (c.size() != terms) throw UsageError("coefficient set has wrong length for order " + std::to_string(order));
    maps.push_back(detail::evaluate_series(grid, order, c));
  }
  detail::validate_maps(grid, maps);
  return CoilModel{grid, std::move(maps), CoilMode::bandlimited, order, std::move(coefficients)};
}

/// Single coil with c == 1 on `dims`.
inline CoilModel unit_coil(std::vector<int> dims) {
  GridSpec grid(std::move(dims), 1);
  return bandlimited_coils(grid, 0, {CArray{Complex{1.0, 0.0}}});
}

/// Seeded smooth coils: order-L series with random coefficients decaying as
/// 1/(1+|m|^2), plus a magnitude bias that peaks at a per-coil position so the
/// maps stay linearly independent.
inline CoilModel make_coils(const GridSpec& grid, int order, std::uint64_t seed) {
  grid.validate();
  if (order < 0) throw UsageError("coil series order must be >= 0");
  const std::size_t nd = grid.ndims();
  const Index terms = detail::series_size(order, nd);
  const int width = 2 * order + 1;
  auto term_index = [&](const std::vector<int>& m) {
    Index t = 0;
    for (std::size_t d = 0; d < nd; ++d) t = t * width + (m[d] + order);
    return static_cast<std::size_t>(t);
  };

  Rng rng(seed);
  std::vector<CArray> coeffs;
  for (int j = 0; j < grid.coils; ++j) {
    CArray c(static_cast<std::size_t>(terms));
    std::vector<int> m(nd);
    for (Index t = 0; t < terms; ++t) {
      Index rest = t;
      double norm2 = 0.0;
      for (std::size_t d = nd; d-- > 0;) {
        m[d] = static_cast<int>(rest % width) - order;
        rest /= width;
        norm2 += static_cast<double>(m[d]) * m[d];
      }
      c[static_cast<std::size_t>(t)] = rng.complex_normal() * (0.25 / (1.0 + norm2));
    }
    c[term_index(std::vector<int>(nd, 0))] += 1.0;
    if (order >= 1) {
      const double angle = 2.0 * std::numbers::pi * j / grid.coils + std::numbers::pi / 4.0;
      const double pos[2] = {0.3 * std::cos(angle), 0.3 * std::sin(angle)};
      constexpr double alpha = 0.8;
      for (std::size_t d = 0; d < std::min<std::size_t>(nd, 2); ++d) {
        std::vector<int> plus(nd, 0), minus(nd, 0);
        plus[d] = 1;
        minus[d] = -1;
        const Complex ph = std::polar(1.0, -2.0 * std::numbers::pi * pos[d]);
        c[term_index(plus)] += 0.5 * alpha * ph;
        c[term_index(minus)] += 0.5 * alpha * std::conj(ph);
      }
    }
    coeffs.push_back(std::move(c));
  }
  return bandlimited_coils(grid, order, std::move(coeffs));
}

/// Max relative deviation between stored pixel maps and the re-evaluated series.
inline double coefficient_reproduction_error(const CoilModel& model) {
  if (model.mode != CoilMode::bandlimited) throw UsageError("coil model is not bandlimited");
  double worst = 0.0;
  for (int j = 0; j < model.coils(); ++j) {
    const auto eval = detail::evaluate_series(model.grid, model.order, model.coefficients[static_cast<std::size_t>(j)]);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      num += std::norm(eval[i] - model.map(j)[i]);
      den += std::norm(model.map(j)[i]);
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

}  // namespace kcrime
