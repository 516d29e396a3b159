// kcrime: command-line front end for the retrospective-experiment toolkit.
//
// Exit codes: 0 ok, 1 numeric failure (or a bound violation in `verify`), 2 usage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kcrime/experiment.hpp"
#include "kcrime/kcrime.hpp"
#include "kcrime/suite.hpp"

namespace fs = std::filesystem;
using namespace kcrime;

namespace {

constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

/// A pattern argument is a file if one exists at that path, else a spec string.
SamplingPattern resolve_pattern(const std::string& arg, const GridSpec& grid) {
  if (fs::is_regular_file(arg)) {
    auto p = load_pattern(arg);
    if (p.grid() != grid)
      throw GridMismatch("pattern file " + arg + " has grid " + p.grid().to_string() + " but the coils use grid " +
                         grid.to_string());
    return p;
  }
  return parse_pattern_spec(arg, grid);
}

std::optional<double> parse_lambda(const std::string& v) {
  if (v == "auto") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && d >= 0.0) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("--lambda must be 'auto' or a nonnegative number, got '" + v + "'");
}

std::optional<std::size_t> parse_rank(int r) {
  if (r < 0) return std::nullopt;
  if (r == 0) throw UsageError("--rank must be positive");
  return static_cast<std::size_t>(r);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os << j.dump(2) << '\n';
}

struct CoilArgs {
  std::string file;
  std::string grid = "32x32x4";
  int order = 3;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--coils", file, "Coil file (.kcb) written by `phantom`");
    app->add_option("--grid", grid, "Grid when generating coils, e.g. 32x32x4")->capture_default_str();
    app->add_option("--coil-order", order, "Coil series order L")->capture_default_str();
    app->add_option("--coil-seed", seed, "Coil seed")->capture_default_str();
  }

  CoilModel load() const { return file.empty() ? make_coils(parse_grid(grid), order, seed) : load_coils(file); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrospective-undersampling error analysis for multicoil k-space data"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // phantom
  auto* ph = app.add_subcommand("phantom", "Generate coils and a ground-truth phantom");
  CoilArgs ph_coils;
  ph->add_option("--grid", ph_coils.grid)->capture_default_str();
  ph->add_option("--coil-order", ph_coils.order)->capture_default_str();
  ph->add_option("--coil-seed", ph_coils.seed)->capture_default_str();
  std::string ph_mode = "analytic", ph_out;
  std::uint64_t ph_seed = 0;
  int ph_count = 4;
  bool ph_pgm = false;
  ph->add_option("--mode", ph_mode, "analytic | discrete")->check(CLI::IsMember({"analytic", "discrete"}))->capture_default_str();
  ph->add_option("--seed", ph_seed, "Ellipse seed (0 = built-in layout)")->capture_default_str();
  ph->add_option("--ellipses", ph_count, "Ellipse count for seeded layouts")->capture_default_str();
  ph->add_option("--out", ph_out, "Output directory")->required();
  ph->add_flag("--dump-pgm", ph_pgm, "Also write PGM previews");

  // pattern
  auto* pa = app.add_subcommand("pattern", "Write a sampling-pattern file");
  std::string pa_spec, pa_grid, pa_out;
  pa->add_option("--spec", pa_spec, "full | uniform:R=..,axis=.. | caipi:AxB,shift=.. | random:R=..,seed=..")->required();
  pa->add_option("--grid", pa_grid, "e.g. 32x32x4")->required();
  pa->add_option("--out", pa_out, "Output file")->required();

  // weights
  auto* we = app.add_subcommand("weights", "Compute interpolation weights W(S_src, S_dst)");
  CoilArgs we_coils;
  we_coils.attach(we);
  std::string we_src, we_dst, we_lambda = "auto", we_out, we_csv;
  int we_rank = -1;
  we->add_option("--src", we_src, "Source pattern (file or spec)")->required();
  we->add_option("--dst", we_dst, "Target pattern (file or spec)")->required();
  we->add_option("--lambda", we_lambda, "auto | value")->capture_default_str();
  we->add_option("--rank", we_rank, "Keep only the top-k eigenmodes");
  we->add_option("--out", we_out, "Output matrix (.kcb)")->required();
  we->add_option("--csv", we_csv, "Also write the matrix as CSV (small matrices only)");

  // power
  auto* po = app.add_subcommand("power", "Compute the composite power map");
  CoilArgs po_coils;
  po_coils.attach(po);
  std::string po_pro, po_retro, po_all = "full", po_lambda = "auto", po_out;
  int po_rank = -1;
  bool po_pgm = false;
  po->add_option("--pro", po_pro, "Prospective pattern (file or spec)")->required();
  po->add_option("--retro", po_retro, "Retrospective pattern (file or spec)")->required();
  po->add_option("--all", po_all, "Target pattern (file or spec)")->capture_default_str();
  po->add_option("--lambda", po_lambda, "auto | value")->capture_default_str();
  po->add_option("--rank", po_rank, "Keep only the top-k eigenmodes");
  po->add_option("--out", po_out, "Output directory")->required();
  po->add_flag("--dump-pgm", po_pgm, "Also write per-coil PGM maps");

  // recon
  auto* re = app.add_subcommand("recon", "Acquire data from a phantom and reconstruct it");
  CoilArgs re_coils;
  re_coils.attach(re);
  std::string re_truth, re_pattern, re_method = "rkhs", re_lambda = "auto", re_all = "full", re_out, re_snr = "none";
  std::uint64_t re_noise_seed = 7;
  int re_rank = -1;
  bool re_pgm = false;
  re->add_option("--truth", re_truth, "Ground truth (.kcb) written by `phantom`")->required();
  re->add_option("--pattern", re_pattern, "Sampling pattern (file or spec)")->required();
  re->add_option("--method", re_method, "rkhs | lsq")->check(CLI::IsMember({"rkhs", "lsq"}))->capture_default_str();
  re->add_option("--lambda", re_lambda, "auto | value")->capture_default_str();
  re->add_option("--rank", re_rank, "Keep only the top-k eigenmodes (rkhs)");
  re->add_option("--all", re_all, "Target pattern for rkhs (file or spec)")->capture_default_str();
  re->add_option("--snr", re_snr, "SNR in dB, or none")->capture_default_str();
  re->add_option("--noise-seed", re_noise_seed)->capture_default_str();
  re->add_option("--out", re_out, "Output directory")->required();
  re->add_flag("--dump-pgm", re_pgm, "Also write PGM previews");

  // verify
  auto* ve = app.add_subcommand("verify", "Run the seeded error-bound sweep; nonzero exit on violation");
  std::string ve_preset = "discrete-4x4";
  std::uint64_t ve_seeds = 50;
  double ve_tol = 1e-8;
  bool ve_oracle = false;
  ve->add_option("--preset", ve_preset, "discrete-4x4 | discrete-8x8")->capture_default_str();
  ve->add_option("--seeds", ve_seeds, "Number of seeds")->capture_default_str();
  ve->add_option("--tol", ve_tol, "Relative tolerance")->capture_default_str();
  ve->add_flag("--oracle", ve_oracle)->group("");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a full retrospective experiment from a config");
  std::string ex_config, ex_preset, ex_out;
  std::vector<std::string> ex_set;
  ex->add_option("--config", ex_config, "Config file (key = value)");
  ex->add_option("--preset", ex_preset, "full-vs-r2 | caipi-vs-random");
  ex->add_option("--set", ex_set, "Override a config key: key=value (repeatable)");
  ex->add_option("--out", ex_out, "Output directory (overrides the config)");
  ex->add_flag("--dump-pgm{true},--no-pgm{false}", "Toggle PGM output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    apply_thread_override();

    if (*ph) {
      const auto coils = make_coils(parse_grid(ph_coils.grid), ph_coils.order, ph_coils.seed);
      GroundTruth gt;
      if (ph_mode == "discrete") {
        gt = make_phantom_discrete(coils, ph_seed + 1, ph_count);
      } else {
        const auto es = ph_seed == 0 ? default_ellipses() : seeded_ellipses(ph_seed, ph_count);
        gt = make_phantom_analytic(coils, es);
      }
      ensure_dir(ph_out);
      save_coils((fs::path(ph_out) / "coils.kcb").string(), coils);
      save_truth((fs::path(ph_out) / "truth.kcb").string(), gt);
      if (ph_pgm) {
        for (int j = 0; j < coils.grid.coils; ++j) {
          const auto sj = std::to_string(j);
          write_pgm((fs::path(ph_out) / ("coil" + sj + ".pgm")).string(), magnitude(coils.map(j)), coils.grid.dims,
                    false, 6.0, false);
          write_pgm((fs::path(ph_out) / ("kspace" + sj + ".pgm")).string(),
                    magnitude(gt.coil_kspace[static_cast<std::size_t>(j)]), coils.grid.dims, true);
        }
      }
      std::cout << "grid " << coils.grid.to_string() << ", rho_l2 " << gt.rho_l2 << '\n';
    } else if (*pa) {
      const auto p = parse_pattern_spec(pa_spec, parse_grid(pa_grid));
      save_pattern(pa_out, p);
      std::cout << p.label() << ": " << p.size() << " points\n";
    } else if (*we) {
      const auto coils = we_coils.load();
      const auto tables = build_tables(coils);
      const auto src = resolve_pattern(we_src, coils.grid);
      const auto dst = resolve_pattern(we_dst, coils.grid);
      const double lambda = parse_lambda(we_lambda).value_or(default_lambda(tables));
      const auto w = weights(tables, src, dst, lambda, parse_rank(we_rank));
      save_matrix(we_out, w.W, coils.grid);
      if (!we_csv.empty()) save_matrix_csv(we_csv, w.W);
      std::cout << "W " << w.W.rows() << "x" << w.W.cols() << ", lambda " << lambda << '\n';
    } else if (*po) {
      const auto coils = po_coils.load();
      const auto tables = build_tables(coils);
      const auto pro = resolve_pattern(po_pro, coils.grid);
      const auto retro = resolve_pattern(po_retro, coils.grid);
      const auto all = resolve_pattern(po_all, coils.grid);
      const double lambda = parse_lambda(po_lambda).value_or(default_lambda(tables));
      const auto m_pro = kernel_matrix(tables, pro, pro);
      const auto op = delta_w(tables, m_pro, retro, all, lambda, parse_rank(po_rank));
      const auto pm = power_map(op, m_pro);
      ensure_dir(po_out);
      RunManifest m;
      m.config.name = "power";
      m.config.grid = coils.grid;
      m.lambda = lambda;
      detail::Recorder rec(po_out, m);
      write_power(rec, "", pm, po_pgm);
      auto summary = power_summary(pm, lambda, pro.label(), retro.label());
      summary["maximal_data_crime"] = op.maximal_crime();
      write_json((fs::path(po_out) / "summary.json").string(), summary);
      std::cout << "p2 mean " << pm.mean() << ", max " << pm.max() << ", cv " << pm.coefficient_of_variation()
                << (op.maximal_crime() ? " (maximal data-crime configuration)" : "") << '\n';
    } else if (*re) {
      const auto coils = re_coils.load();
      const auto gt = load_truth(re_truth);
      if (gt.grid != coils.grid)
        throw GridMismatch("truth grid " + gt.grid.to_string() + " does not match coil grid " + coils.grid.to_string());
      const auto pattern = resolve_pattern(re_pattern, coils.grid);
      std::optional<double> snr;
      if (re_snr != "none") snr = std::stod(re_snr);
      const auto data = acquire(gt, pattern, snr, re_noise_seed);
      ReconResult r;
      if (re_method == "rkhs") {
        const auto tables = build_tables(coils);
        const double lambda = parse_lambda(re_lambda).value_or(default_lambda(tables));
        r = rkhs_reconstruct(tables, coils, data, resolve_pattern(re_all, coils.grid), lambda, parse_rank(re_rank));
      } else {
        r = lsq_reconstruct(coils, data, parse_lambda(re_lambda));
      }
      ensure_dir(re_out);
      Container c;
      c.dims = coils.grid.dims;
      c.coils = coils.grid.coils;
      c.arrays.push_back({"kspace", DType::c128, detail::coil_shape(coils.grid), {}, detail::flatten(r.kspace_full)});
      std::vector<std::uint64_t> img_shape(coils.grid.dims.begin(), coils.grid.dims.end());
      c.arrays.push_back({"image", DType::c128, img_shape, {}, r.image});
      write_container((fs::path(re_out) / "recon.kcb").string(), c);
      nlohmann::json j = {{"method", to_string(r.method)}, {"lambda", r.lambda}, {"pattern", pattern.label()}};
      if (r.method == ReconMethod::lsq) {
        j["iterations"] = r.iterations;
        j["residual"] = r.residual;
        j["converged"] = r.converged;
        if (!r.converged)
          std::cerr << "warning: lsq stopped after " << r.iterations << " iterations at relative residual " << r.residual
                    << '\n';
      }
      // The phantom's own k-space is the natural reference on the full grid.
      ReconResult truth;
      truth.grid = coils.grid;
      truth.kspace_full = gt.coil_kspace;
      combine_coils(coils, truth);
      const auto em = error_maps(r, truth);
      j["nrmse_vs_truth"] = em.nrmse;
      j["max_abs_vs_truth"] = em.max_abs;
      write_json((fs::path(re_out) / "metrics.json").string(), j);
      if (re_pgm) {
        write_pgm((fs::path(re_out) / "image.pgm").string(), magnitude(r.image), coils.grid.dims, false, 6.0, false);
        write_pgm((fs::path(re_out) / "image_err.pgm").string(), em.image_err, coils.grid.dims, false, 6.0, false);
      }
      std::cout << to_string(r.method) << " nrmse vs truth " << em.nrmse << '\n';
    } else if (*ve) {
      const auto preset = sweep_preset(ve_preset);
      const auto res = bound_sweep(preset, ve_seeds, ve_tol, ve_oracle);
      for (const auto& c : res.cases) {
        std::cout << "seed " << c.seed << " " << c.pro << " -> " << c.retro << ": max violation " << c.max_violation
                  << " (tol " << c.tolerance << "), violations " << c.violations;
        if (c.oracle_deviation) std::cout << ", oracle deviation " << *c.oracle_deviation;
        std::cout << '\n';
      }
      bool ok = res.pass();
      if (ve_oracle && res.worst_oracle_deviation > 1e-10) {
        std::cout << "oracle mismatch: " << res.worst_oracle_deviation << '\n';
        ok = false;
      }
      std::cout << (ok ? "PASS" : "FAIL") << ": " << res.cases.size() << " seeds, " << res.violations
                << " violations\n";
      return ok ? 0 : kExitNumeric;
    } else if (*ex) {
      if (ex_config.empty() == ex_preset.empty()) throw UsageError("experiment needs exactly one of --config or --preset");
      auto cfg = ex_config.empty() ? preset(ex_preset) : load_config(ex_config);
      for (const auto& kv : ex_set) apply_override(cfg, kv);
      if (const auto* opt = ex->get_option("--dump-pgm"); opt->count() > 0) cfg.emit_maps = opt->as<bool>();
      if (!ex_out.empty()) cfg.out_dir = ex_out;
      const auto m = run_experiment(cfg);
      for (const auto& r : m.runs) {
        std::cout << r.pro_label << " -> " << r.retro_label << ": p2 mean " << r.p2_mean << ", cv " << r.p2_cv
                  << ", chain residual " << r.chain_residual << ", nrmse rkhs " << r.nrmse_rkhs << ", lsq "
                  << r.nrmse_lsq << (r.maximal_crime ? " (maximal data-crime configuration)" : "") << '\n';
      }
      if (m.json.contains("comparison"))
        std::cout << "mean p2 direction: " << m.json["comparison"]["direction"].get<std::string>() << '\n';
      std::cout << "manifest: " << (fs::path(cfg.out_dir) / "manifest.json").string() << '\n';
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
