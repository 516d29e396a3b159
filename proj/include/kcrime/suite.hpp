#pragma once

// Seeded bound-verification sweeps on small discrete-mode instances.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcrime/kcrime.hpp"
#include "kcrime/oracle.hpp"

namespace kcrime {

struct SweepPreset {
  std::string name;
  GridSpec grid;
  int coil_order = 1;
};

inline SweepPreset sweep_preset(const std::string& name) {
  if (name == "discrete-4x4") return {name, GridSpec{{4, 4}, 2}, 1};
  if (name == "discrete-8x8") return {name, GridSpec{{8, 8}, 4}, 2};
  throw UsageError("unknown verify preset '" + name + "' (expected discrete-4x4 or discrete-8x8)");
}

struct SweepCase {
  std::uint64_t seed = 0;
  std::string pro;
  std::string retro;
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::size_t violations = 0;
  /// max |p2 - oracle| / max diag M_pro, when the oracle was run.
  std::optional<double> oracle_deviation;
};

struct SweepResult {
  std::vector<SweepCase> cases;
  std::size_t violations = 0;
  double worst_oracle_deviation = 0.0;
  bool pass() const { return violations == 0; }
};

/// For each seed: fresh coils, a random in-span image and a random pro/retro
/// pair (pro is R=2, retro is R=2 or R=3, both random). The bound tolerance is
/// `rel_tol` times ||rho|| sqrt(max diag M_pro).
inline SweepResult bound_sweep(const SweepPreset& preset, std::uint64_t seeds, double rel_tol = 1e-8,
                               bool with_oracle = false, std::uint64_t first_seed = 1) {
  SweepResult out;
  for (std::uint64_t s = first_seed; s < first_seed + seeds; ++s) {
    const auto coils = make_coils(preset.grid, preset.coil_order, 1000 + s);
    const auto tables = build_tables(coils);
    const auto gt = make_phantom_discrete(coils, random_image(preset.grid, 2000 + s));
    const auto pro = random_pattern(preset.grid, 2, 3000 + s);
    const auto retro = random_pattern(preset.grid, s % 2 == 0 ? 2 : 3, 4000 + s);
    const auto all = full_grid(preset.grid);
    const double lambda = default_lambda(tables);
    const auto m_pro = kernel_matrix(tables, pro, pro);
    const auto op = delta_w(tables, m_pro, retro, all, lambda);
    const auto rep = verify_bound(op, m_pro, gt, rel_tol * bound_scale(m_pro, gt.rho_l2));

    SweepCase c{s, pro.label(), retro.label(), rep.max_violation, rep.tolerance, rep.violations, std::nullopt};
    if (with_oracle) {
      const auto pm = power_map(op, m_pro);
      const auto ref = oracle::oracle_power(coils, pro, retro, all, lambda);
      // p^2(z) never exceeds ||eps_z||^2 by much, so the kernel diagonal is its natural unit.
      const double scale = m_pro.data.diagonal().real().maxCoeff();
      double dev = 0.0;
      for (std::size_t z = 0; z < ref.size(); ++z) dev = std::max(dev, std::abs(pm.p2[z] - std::max(ref[z], 0.0)));
      c.oracle_deviation = dev / scale;
      out.worst_oracle_deviation = std::max(out.worst_oracle_deviation, *c.oracle_deviation);
    }
    out.violations += rep.violations;
    out.cases.push_back(std::move(c));
  }
  return out;
}

}  // namespace kcrime
