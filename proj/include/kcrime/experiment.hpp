#pragma once

// End-to-end retrospective-experiment runner:
//   phantom -> acquire -> dW -> experiment error -> power map -> recons -> error maps
// driven by a key = value config file, writing every artifact plus a JSON
// manifest with SHA-256 checksums.

#include <openssl/evp.h>

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcrime/kcrime.hpp"

namespace kcrime {

inline constexpr const char* kVersion = "1.0.0";

/// Honors KCRIME_THREADS (positive integer) for Eigen's internal parallelism.
inline void apply_thread_override() {
  if (const char* v = std::getenv("KCRIME_THREADS"); v != nullptr && *v != '\0') {
    const int n = detail::parse_int(v, "KCRIME_THREADS");
    if (n < 1) throw UsageError("KCRIME_THREADS must be positive");
    Eigen::setNbThreads(n);
  }
}

struct ExperimentConfig {
  std::string name = "experiment";
  GridSpec grid{{32, 32}, 4};
  int coil_order = 3;
  std::uint64_t coil_seed = 1;
  PhantomMode phantom = PhantomMode::analytic;
  /// 0 selects the built-in ellipse layout; otherwise seeded ellipses.
  std::uint64_t phantom_seed = 0;
  int ellipse_count = 4;
  std::optional<double> snr_db = 35.0;
  std::uint64_t noise_seed = 7;
  /// nullopt means the automatic rule (1e-6 x average eigenvalue of M(S_all, S_all)).
  std::optional<double> lambda;
  std::optional<std::size_t> rank;
  std::vector<std::string> pro;
  std::string retro;
  std::string all = "full";
  std::optional<double> lsq_lambda;
  std::string out_dir = "kcrime-out";
  bool emit_maps = true;
  bool emit_matrices = false;
  bool emit_report = true;
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  const auto l = lower(v);
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw UsageError("invalid boolean for " + key + ": '" + v + "'");
}

inline double parse_double(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || !std::isfinite(d)) throw UsageError("invalid number for " + key + ": '" + v + "'");
  return d;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw UsageError("invalid unsigned integer for " + key + ": '" + v + "'");
  return out;
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "name") {
    c.name = value;
  } else if (key == "grid") {
    c.grid = parse_grid(value);
  } else if (key == "coil_order") {
    c.coil_order = detail::parse_int(value, key);
  } else if (key == "coil_seed") {
    c.coil_seed = parse_u64(value, key);
  } else if (key == "phantom") {
    const auto l = lower(value);
    if (l == "analytic") c.phantom = PhantomMode::analytic;
    else if (l == "discrete") c.phantom = PhantomMode::discrete;
    else throw UsageError("phantom must be analytic or discrete, got '" + value + "'");
  } else if (key == "phantom_seed") {
    c.phantom_seed = parse_u64(value, key);
  } else if (key == "ellipses") {
    c.ellipse_count = detail::parse_int(value, key);
  } else if (key == "snr_db") {
    if (lower(value) == "none") c.snr_db.reset();
    else c.snr_db = parse_double(value, key);
  } else if (key == "noise_seed") {
    c.noise_seed = parse_u64(value, key);
  } else if (key == "lambda") {
    if (lower(value) == "auto") c.lambda.reset();
    else c.lambda = parse_double(value, key);
  } else if (key == "rank") {
    if (lower(value) == "none") c.rank.reset();
    else c.rank = parse_u64(value, key);
  } else if (key == "pro") {
    c.pro.clear();
    for (auto item : split(value, ';'))
      if (auto t = trim(item); !t.empty()) c.pro.emplace_back(t);
  } else if (key == "retro") {
    c.retro = value;
  } else if (key == "all") {
    c.all = value;
  } else if (key == "lsq_lambda") {
    if (lower(value) == "auto") c.lsq_lambda.reset();
    else c.lsq_lambda = parse_double(value, key);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "emit_maps") {
    c.emit_maps = parse_bool(value, key);
  } else if (key == "emit_matrices") {
    c.emit_matrices = parse_bool(value, key);
  } else if (key == "emit_report") {
    c.emit_report = parse_bool(value, key);
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

/// Parses `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline ExperimentConfig parse_config(std::istream& is, const std::string& source, ExperimentConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected 'key = value'");
    try {
      set_config_value(base, std::string(detail::trim(view.substr(0, eq))), std::string(detail::trim(view.substr(eq + 1))));
    } catch (const ParseError&) {
      throw;
    } catch (const UsageError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config " + path);
  return parse_config(is, path);
}

/// Overrides of the form key=value.
inline void apply_override(ExperimentConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw UsageError("override must look like key=value, got '" + kv + "'");
  set_config_value(c, std::string(detail::trim(std::string_view(kv).substr(0, eq))),
                   std::string(detail::trim(std::string_view(kv).substr(eq + 1))));
}

/// Fully sampled vs R=2 uniform prospective data, both retrospectively
/// undersampled to R=3 uniform along the same axis.
inline ExperimentConfig preset_full_vs_r2() {
  ExperimentConfig c;
  c.name = "full-vs-r2";
  c.pro = {"full", "uniform:R=2,axis=0"};
  c.retro = "uniform:R=3,axis=0";
  c.out_dir = "kcrime-out/full-vs-r2";
  return c;
}

/// CAIPIRINHA 2x2 vs random R=4 prospective data, both retrospectively
/// undersampled to a different random R=4 pattern.
inline ExperimentConfig preset_caipi_vs_random() {
  ExperimentConfig c;
  c.name = "caipi-vs-random";
  c.pro = {"caipi:2x2,shift=1", "random:R=4,seed=11"};
  c.retro = "random:R=4,seed=23";
  c.out_dir = "kcrime-out/caipi-vs-random";
  return c;
}

inline ExperimentConfig preset(const std::string& name) {
  if (name == "full-vs-r2") return preset_full_vs_r2();
  if (name == "caipi-vs-random") return preset_caipi_vs_random();
  throw UsageError("unknown preset '" + name + "' (expected full-vs-r2 or caipi-vs-random)");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["grid"] = c.grid.to_string();
  j["coil_order"] = c.coil_order;
  j["coil_seed"] = c.coil_seed;
  j["phantom"] = c.phantom == PhantomMode::analytic ? "analytic" : "discrete";
  j["phantom_seed"] = c.phantom_seed;
  j["ellipses"] = c.ellipse_count;
  j["snr_db"] = c.snr_db ? nlohmann::json(*c.snr_db) : nlohmann::json("none");
  j["noise_seed"] = c.noise_seed;
  j["lambda"] = c.lambda ? nlohmann::json(*c.lambda) : nlohmann::json("auto");
  j["rank"] = c.rank ? nlohmann::json(*c.rank) : nlohmann::json("none");
  j["pro"] = c.pro;
  j["retro"] = c.retro;
  j["all"] = c.all;
  j["lsq_lambda"] = c.lsq_lambda ? nlohmann::json(*c.lsq_lambda) : nlohmann::json("auto");
  j["out"] = c.out_dir;
  j["emit_maps"] = c.emit_maps;
  j["emit_matrices"] = c.emit_matrices;
  j["emit_report"] = c.emit_report;
  return j;
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

struct FileRecord {
  std::string path;  // relative to the output directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunSummary {
  std::string dir;
  std::string pro_label;
  std::string retro_label;
  bool maximal_crime = false;
  double p2_mean = 0.0;
  double p2_max = 0.0;
  double p2_cv = 0.0;
  double chain_residual = 0.0;
  double spearman_kspace_err = 0.0;
  double nrmse_rkhs = 0.0;
  double nrmse_lsq = 0.0;
};

struct RunManifest {
  ExperimentConfig config;
  double lambda = 0.0;
  std::vector<RunSummary> runs;
  std::vector<FileRecord> files;
  std::vector<std::pair<std::string, double>> timings;
  nlohmann::json json;
  std::optional<std::string> failed_stage;
};

namespace detail {

class Recorder {
 public:
  Recorder(std::filesystem::path root, RunManifest& m) : root_(std::move(root)), m_(m) {}

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  void add(const std::string& rel) {
    const auto full = root_ / rel;
    m_.files.push_back({rel, std::filesystem::file_size(full), sha256_file(full.string())});
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        f();
        done(name, t0);
      } else {
        auto r = f();
        done(name, t0);
        return r;
      }
    } catch (const Error& e) {
      m_.failed_stage = name;
      write_manifest(e.what());
      const std::string msg = "stage '" + name + "' failed: " + e.what();
      if (dynamic_cast<const UsageError*>(&e)) throw UsageError(msg);
      if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
      throw Error(msg);
    } catch (const std::exception& e) {
      m_.failed_stage = name;
      write_manifest(e.what());
      throw Error("stage '" + name + "' failed: " + e.what());
    }
  }

  void write_manifest(const std::optional<std::string>& error = std::nullopt) {
    auto& j = m_.json;
    j["tool"] = "kcrime";
    j["version"] = kVersion;
    j["config"] = to_json(m_.config);
    j["seeds"] = {{"coil_seed", m_.config.coil_seed},
                  {"phantom_seed", m_.config.phantom_seed},
                  {"noise_seed", m_.config.noise_seed}};
    j["lambda"] = m_.lambda;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : m_.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    j["files"] = files;
    nlohmann::json timings = nlohmann::json::object();
    for (const auto& [k, v] : m_.timings) timings[k] = v;
    j["timings_s"] = timings;
    if (error) j["error"] = {{"stage", m_.failed_stage.value_or("")}, {"message", *error}};
    std::ofstream os(root_ / "manifest.json");
    os << j.dump(2) << '\n';
  }

 private:
  void done(const std::string& name, std::chrono::steady_clock::time_point t0) {
    m_.timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::filesystem::path root_;
  RunManifest& m_;
};

inline std::string sanitize(const std::string& label) {
  std::string s;
  for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

inline nlohmann::json write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os << j.dump(2) << '\n';
  return j;
}

inline std::vector<double> gather(const std::vector<CArray>& per_coil, const SamplingPattern& p) {
  std::vector<double> v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    v[i] = std::abs(per_coil[static_cast<std::size_t>(p[i].coil)][static_cast<std::size_t>(p.location(i))]);
  return v;
}

}  // namespace detail

/// Writes p^2 as a float64 array shaped [coils, dims...] plus per-coil PGMs.
inline void write_power(detail::Recorder& rec, const std::string& prefix, const PowerMap& pm, bool maps) {
  const auto& g = pm.target.grid();
  const auto per_coil = pm.per_coil();
  Container c;
  c.dims = g.dims;
  c.coils = g.coils;
  ContainerArray a{"p2", DType::f64, detail::coil_shape(g), {}, {}};
  for (const auto& m : per_coil) a.real.insert(a.real.end(), m.begin(), m.end());
  c.arrays.push_back(std::move(a));
  write_container(rec.path(prefix + "power_p2.kcb"), c);
  rec.add(prefix + "power_p2.kcb");
  if (maps) {
    for (int j = 0; j < g.coils; ++j) {
      const auto name = prefix + "power_coil" + std::to_string(j) + ".pgm";
      write_pgm(rec.path(name), per_coil[static_cast<std::size_t>(j)], g.dims, true);
      rec.add(name);
    }
  }
}

inline nlohmann::json power_summary(const PowerMap& pm, double lambda, const std::string& pro, const std::string& retro) {
  const auto arg = pm.argmax();
  const auto& pt = pm.target[arg];
  return {{"mean", pm.mean()},
          {"max", pm.max()},
          {"argmax", {{"index", arg}, {"kidx", pt.kidx}, {"coil", pt.coil}}},
          {"cv", pm.coefficient_of_variation()},
          {"lambda", lambda},
          {"pro", pro},
          {"retro", retro}};
}

/// Executes every stage and writes artifacts under config.out_dir.
inline RunManifest run_experiment(const ExperimentConfig& config) {
  if (config.pro.empty()) throw UsageError("config needs at least one prospective pattern (pro = ...)");
  if (config.retro.empty()) throw UsageError("config needs a retrospective pattern (retro = ...)");
  config.grid.validate();
  namespace fs = std::filesystem;
  const fs::path root(config.out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw UsageError("cannot create output directory " + config.out_dir);

  RunManifest m;
  m.config = config;
  detail::Recorder rec(root, m);

  const auto coils = rec.stage("coils", [&] { return make_coils(config.grid, config.coil_order, config.coil_seed); });
  const auto tables = rec.stage("tables", [&] { return build_tables(coils); });
  m.lambda = config.lambda.value_or(default_lambda(tables));

  const auto gt = rec.stage("phantom", [&] {
    if (config.phantom == PhantomMode::discrete) return make_phantom_discrete(coils, config.phantom_seed + 1, config.ellipse_count);
    const auto es = config.phantom_seed == 0 ? default_ellipses() : seeded_ellipses(config.phantom_seed, config.ellipse_count);
    return make_phantom_analytic(coils, es);
  });
  const auto [retro, all] = rec.stage("patterns", [&] {
    return std::pair{parse_pattern_spec(config.retro, config.grid), parse_pattern_spec(config.all, config.grid)};
  });
  rec.stage("write-inputs", [&] {
    save_coils(rec.path("coils.kcb"), coils);
    rec.add("coils.kcb");
    save_truth(rec.path("truth.kcb"), gt);
    rec.add("truth.kcb");
    save_pattern(rec.path("pattern_retro.txt"), retro);
    rec.add("pattern_retro.txt");
  });

  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t r = 0; r < config.pro.size(); ++r) {
    const std::string tag = "run" + std::to_string(r);
    const auto pro = rec.stage(tag + ":pattern", [&] { return parse_pattern_spec(config.pro[r], config.grid); });
    const std::string dir = tag + "_" + detail::sanitize(pro.label());
    fs::create_directories(root / dir);
    const std::string pre = dir + "/";
    RunSummary s;
    s.dir = dir;
    s.pro_label = pro.label();
    s.retro_label = retro.label();
    s.maximal_crime = pro.same_points(retro);

    save_pattern(rec.path(pre + "pattern_pro.txt"), pro);
    rec.add(pre + "pattern_pro.txt");

    const auto y_pro = rec.stage(tag + ":acquire", [&] { return acquire(gt, pro, config.snr_db, config.noise_seed); });
    const auto m_pro = rec.stage(tag + ":kernel", [&] { return kernel_matrix(tables, pro, pro); });
    const auto op = rec.stage(tag + ":delta_w", [&] { return delta_w(tables, m_pro, retro, all, m.lambda, config.rank); });
    const Vector err = rec.stage(tag + ":experiment_error", [&] { return experiment_error(op, y_pro); });
    const auto pm = rec.stage(tag + ":power_map", [&] { return power_map(op, m_pro); });

    const auto ref = rec.stage(tag + ":recon_direct", [&] { return rkhs_reconstruct(coils, op.pro_all, y_pro); });
    const auto y_retro = subsample(ref, retro);
    const auto test = rec.stage(tag + ":recon_chain", [&] { return rkhs_reconstruct(coils, op.retro_all, y_retro); });
    const auto sense = rec.stage(tag + ":recon_lsq", [&] { return lsq_reconstruct(coils, y_retro, config.lsq_lambda); });
    const auto em = rec.stage(tag + ":error_maps", [&] { return error_maps(test, ref); });
    const auto em_lsq = error_maps(sense, ref);

    // Two-path difference vs dW^T y, relative to the reference k-space scale.
    double chain = 0.0, ref_scale = 0.0;
    const auto err_grid = scatter(all, err);
    for (std::size_t j = 0; j < ref.kspace_full.size(); ++j)
      for (std::size_t i = 0; i < ref.kspace_full[j].size(); ++i) {
        ref_scale = std::max(ref_scale, std::abs(ref.kspace_full[j][i]));
        chain = std::max(chain, std::abs(em.kspace_err[j][i] - err_grid[j][i]));
      }
    s.chain_residual = ref_scale > 0.0 ? chain / ref_scale : chain;
    s.p2_mean = pm.mean();
    s.p2_max = pm.max();
    s.p2_cv = pm.coefficient_of_variation();
    s.spearman_kspace_err = spearman(detail::gather(em.kspace_err, all), pm.p2);
    s.nrmse_rkhs = em.nrmse;
    s.nrmse_lsq = em_lsq.nrmse;

    rec.stage(tag + ":write", [&] {
      write_power(rec, pre, pm, config.emit_maps);
      Container ce;
      ce.dims = config.grid.dims;
      ce.coils = config.grid.coils;
      ce.arrays.push_back({"experiment_error", DType::c128, detail::coil_shape(config.grid), {}, detail::flatten(err_grid)});
      write_container(rec.path(pre + "experiment_error.kcb"), ce);
      rec.add(pre + "experiment_error.kcb");
      if (config.emit_matrices) {
        save_matrix(rec.path(pre + "delta_w.kcb"), op.dW, config.grid);
        rec.add(pre + "delta_w.kcb");
      }
      if (config.emit_maps) {
        auto pgm = [&](const std::string& name, const std::vector<double>& v, bool log) {
          write_pgm(rec.path(pre + name), v, config.grid.dims, log);
          rec.add(pre + name);
        };
        for (int j = 0; j < config.grid.coils; ++j)
          pgm("kspace_err_coil" + std::to_string(j) + ".pgm", magnitude(em.kspace_err[static_cast<std::size_t>(j)]), true);
        pgm("recon_direct.pgm", magnitude(ref.image), false);
        pgm("recon_chain.pgm", magnitude(test.image), false);
        pgm("recon_lsq.pgm", magnitude(sense.image), false);
        pgm("image_err.pgm", em.image_err, false);
        pgm("image_err_lsq.pgm", em_lsq.image_err, false);
      }
      if (config.emit_report) {
        auto summary = power_summary(pm, m.lambda, pro.label(), retro.label());
        summary["maximal_data_crime"] = s.maximal_crime;
        detail::write_json(rec.path(pre + "summary.json"), summary);
        rec.add(pre + "summary.json");
        detail::write_json(rec.path(pre + "metrics.json"),
                           {{"rkhs", {{"nrmse", em.nrmse}, {"max_abs", em.max_abs}, {"method", "rkhs"}, {"lambda", m.lambda}}},
                            {"lsq",
                             {{"nrmse", em_lsq.nrmse},
                              {"max_abs", em_lsq.max_abs},
                              {"method", "lsq"},
                              {"lambda", sense.lambda},
                              {"iterations", sense.iterations},
                              {"residual", sense.residual},
                              {"converged", sense.converged}}},
                            {"chain_residual", s.chain_residual},
                            {"spearman_kspace_err_vs_p2", s.spearman_kspace_err}});
        rec.add(pre + "metrics.json");
      }
    });

    nlohmann::json jr = {{"dir", s.dir},
                         {"pro", s.pro_label},
                         {"retro", s.retro_label},
                         {"p2_mean", s.p2_mean},
                         {"p2_max", s.p2_max},
                         {"p2_cv", s.p2_cv},
                         {"chain_residual", s.chain_residual},
                         {"spearman_kspace_err_vs_p2", s.spearman_kspace_err},
                         {"nrmse_rkhs", s.nrmse_rkhs},
                         {"nrmse_lsq", s.nrmse_lsq},
                         {"flags", nlohmann::json::array()}};
    if (s.maximal_crime) jr["flags"].push_back("maximal data-crime configuration");
    runs.push_back(jr);
    m.runs.push_back(s);
  }
  m.json["runs"] = runs;

  if (m.runs.size() >= 2) {
    const double a = m.runs[0].p2_mean, b = m.runs[1].p2_mean;
    std::string direction = a == b ? "equal" : (b < a ? "suppressed" : "elevated");
    m.json["comparison"] = {{"baseline", m.runs[0].pro_label},
                            {"other", m.runs[1].pro_label},
                            {"p2_mean_baseline", a},
                            {"p2_mean_other", b},
                            {"ratio", a > 0.0 ? b / a : 0.0},
                            {"direction", direction}};
  }
  rec.write_manifest();
  return m;
}

/// Re-hashes every file listed in a manifest. Returns the problems found.
inline std::vector<std::string> verify_manifest(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) return {"manifest.json missing"};
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    return {std::string("manifest.json unreadable: ") + e.what()};
  }
  std::vector<std::string> problems;
  for (const auto& f : j.at("files")) {
    const auto rel = f.at("path").get<std::string>();
    const auto full = fs::path(dir) / rel;
    if (!fs::exists(full)) {
      problems.push_back(rel + ": missing");
      continue;
    }
    if (sha256_file(full.string()) != f.at("sha256").get<std::string>()) problems.push_back(rel + ": checksum mismatch");
  }
  return problems;
}

}  // namespace kcrime
