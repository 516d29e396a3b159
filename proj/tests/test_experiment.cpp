#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "kcrime/experiment.hpp"
#include "kcrime/suite.hpp"

using namespace kcrime;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kcrime-experiment-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.name = "small";
  c.grid = GridSpec({16, 16}, 2);
  c.coil_order = 2;
  c.phantom = PhantomMode::discrete;
  c.phantom_seed = 3;
  c.pro = {"full", "uniform:R=2"};
  c.retro = "uniform:R=2";
  c.out_dir = out.string();
  return c;
}

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(KCRIME_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

}  // namespace

TEST(Config, ParsesCommentsAndOverrides) {
  std::istringstream is(
      "# header\n"
      "name = demo   # trailing comment\n"
      "\n"
      "grid = 8x8x2\n"
      "pro = full ; uniform:R=2\n"
      "retro = uniform:R=3\n"
      "snr_db = none\n"
      "lambda = 1e-3\n"
      "rank = 64\n"
      "grid = 16x16x4\n");
  auto c = parse_config(is, "demo.cfg");
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.grid, GridSpec({16, 16}, 4));
  EXPECT_EQ(c.pro, (std::vector<std::string>{"full", "uniform:R=2"}));
  EXPECT_FALSE(c.snr_db.has_value());
  EXPECT_EQ(c.lambda, 1e-3);
  EXPECT_EQ(c.rank, 64u);
  apply_override(c, "lambda=auto");
  apply_override(c, "noise_seed=11");
  EXPECT_FALSE(c.lambda.has_value());
  EXPECT_EQ(c.noise_seed, 11u);
  EXPECT_THROW(apply_override(c, "noequals"), UsageError);
}

TEST(Config, ErrorsCarryLineNumbers) {
  std::istringstream unknown("name = x\n\nbogus = 1\n");
  try {
    parse_config(unknown, "bad.cfg");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bad.cfg:3"), std::string::npos);
  }
  std::istringstream malformed("grid = 8x8x2\nsnr_db = loud\n");
  EXPECT_THROW(parse_config(malformed, "bad.cfg"), ParseError);
  std::istringstream no_eq("grid 8x8x2\n");
  EXPECT_THROW(parse_config(no_eq, "bad.cfg"), ParseError);
}

TEST(Config, ShippedPresetsMatchBuiltins) {
  for (const std::string name : {"full-vs-r2", "caipi-vs-random"}) {
    const auto file = load_config(std::string(KCRIME_CONFIG_DIR) + "/" + name + ".cfg");
    EXPECT_EQ(to_json(file), to_json(preset(name))) << name;
  }
  EXPECT_THROW(preset("nope"), UsageError);
}

TEST(Experiment, ManifestCoversEveryArtifact) {
  const auto dir = scratch("manifest");
  const auto m = run_experiment(small_config(dir));
  ASSERT_EQ(m.runs.size(), 2u);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(j.at("tool"), "kcrime");
  EXPECT_EQ(j.at("config").at("name"), "small");
  EXPECT_TRUE(j.contains("timings_s"));
  EXPECT_FALSE(j.contains("error"));
  std::set<std::string> listed;
  for (const auto& f : j.at("files")) listed.insert(f.at("path").get<std::string>());
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).string();
    if (rel == "manifest.json") continue;
    EXPECT_TRUE(listed.count(rel)) << rel << " not in manifest";
  }
  for (const auto& r : m.runs) {
    EXPECT_TRUE(listed.count(r.dir + "/summary.json"));
    EXPECT_TRUE(listed.count(r.dir + "/metrics.json"));
    EXPECT_TRUE(listed.count(r.dir + "/power_p2.kcb"));
  }
  EXPECT_TRUE(verify_manifest(dir.string()).empty());

  fs::remove(dir / m.runs[0].dir / "summary.json");
  {
    std::ofstream os(dir / "coils.kcb", std::ios::app | std::ios::binary);
    os << 'x';
  }
  const auto problems = verify_manifest(dir.string());
  ASSERT_EQ(problems.size(), 2u);
}

TEST(Experiment, RerunsAreByteIdentical) {
  const auto a = scratch("rerun-a"), b = scratch("rerun-b");
  run_experiment(small_config(a));
  run_experiment(small_config(b));
  const auto ja = nlohmann::json::parse(slurp(a / "manifest.json"));
  const auto jb = nlohmann::json::parse(slurp(b / "manifest.json"));
  EXPECT_EQ(ja.at("files"), jb.at("files"));
  EXPECT_EQ(ja.at("runs"), jb.at("runs"));
}

TEST(Experiment, MaximalCrimeIsFlagged) {
  const auto dir = scratch("maximal");
  auto cfg = small_config(dir);
  cfg.pro = {"uniform:R=3", "full"};
  cfg.retro = "uniform:R=3";
  cfg.emit_maps = false;
  const auto m = run_experiment(cfg);
  EXPECT_TRUE(m.runs[0].maximal_crime);
  EXPECT_FALSE(m.runs[1].maximal_crime);
  // Only the ridge term separates the chain from the direct path here; it enters p^2 as lambda^2.
  EXPECT_LE(m.runs[0].p2_max, 1e-6 * m.runs[1].p2_max);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  const auto& flags = j.at("runs").at(0).at("flags");
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0], "maximal data-crime configuration");
  EXPECT_TRUE(j.at("runs").at(1).at("flags").empty());
  EXPECT_EQ(j.at("comparison").at("direction"), "elevated");
  const auto s = nlohmann::json::parse(slurp(dir / m.runs[0].dir / "summary.json"));
  EXPECT_EQ(s.at("maximal_data_crime"), true);
}

TEST(Experiment, RejectsIncompleteConfig) {
  auto cfg = small_config(scratch("incomplete"));
  cfg.pro.clear();
  EXPECT_THROW(run_experiment(cfg), UsageError);
  cfg = small_config(scratch("incomplete"));
  cfg.retro = "caipi:2x2,shift=2";
  EXPECT_THROW(run_experiment(cfg), UsageError);
}

TEST(Cli, PatternSpecExample) {
  const auto dir = scratch("cli-pattern");
  const auto out = dir / "p.txt";
  const auto r = run_cli("pattern --spec caipi:2x2,shift=1 --grid 32x32x4 --out " + out.string(), dir);
  EXPECT_EQ(r.code, 0) << r.output;
  const auto p = load_pattern(out.string());
  EXPECT_EQ(p.grid(), GridSpec({32, 32}, 4));
  EXPECT_EQ(p.size(), 4u * 32u * 32u / 4u);
}

TEST(Cli, VerifyPresetPasses) {
  const auto dir = scratch("cli-verify");
  const auto r = run_cli("verify --preset discrete-4x4 --seeds 50", dir);
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST(Cli, PowerRejectsPatternFromOtherGrid) {
  const auto dir = scratch("cli-mismatch");
  const auto pat = dir / "p.txt";
  ASSERT_EQ(run_cli("pattern --spec uniform:R=2 --grid 16x16x2 --out " + pat.string(), dir).code, 0);
  const auto r = run_cli("power --grid 8x8x2 --coil-order 1 --pro " + pat.string() +
                             " --retro uniform:R=2 --out " + (dir / "out").string(),
                         dir);
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("16x16x2"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("8x8x2"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch("cli-usage");
  EXPECT_EQ(run_cli("", dir).code, 2);
  EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(run_cli("pattern --spec uniform:R=0 --grid 16x16x2 --out " + (dir / "p.txt").string(), dir).code, 2);
  EXPECT_EQ(run_cli("verify --preset nope", dir).code, 2);
  EXPECT_EQ(run_cli("experiment --preset full-vs-r2 --set bogus=1 --out " + dir.string(), dir).code, 2);
  EXPECT_EQ(run_cli("--version", dir).code, 0);
}
