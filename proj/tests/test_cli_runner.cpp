//==============================================================================
// test_cli_runner.cpp
// Unit tests for the experiment runner layer: config parsing and validation,
// canonical serialization and hashing, deterministic artifact generation, and
// the probe dispatcher.  Heavy convex-integration runs are exercised with
// n_stages = 0, which still produces the full artifact set (summary, initial
// residual, certificate inputs, manifest).
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mikado/report.hpp"

using namespace mikado;
namespace fs = std::filesystem;

namespace {

std::string write_temp_config(const std::string& body, const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_config: flat key=value with comments and defaults") {
  std::string path = write_temp_config(
      "# comment line\n"
      "n = 64\n"
      "n_t = 128   # trailing comment\n"
      "\n"
      "p = 2\n"
      "seed = 77\n"
      "diffusion = true\n",
      "mikado_cfg_parse.cfg");
  RunConfig cfg = parse_config(path);
  CHECK(cfg.n == 64);
  CHECK(cfg.n_t == 128);
  CHECK(cfg.seed == 77);
  CHECK(cfg.diffusion);
  CHECK(cfg.d == 2);           // untouched default
  CHECK(cfg.ptilde == 1.5);    // untouched default
  std::remove(path.c_str());
}

TEST_CASE("parse_config: unknown keys and malformed lines are named errors") {
  std::string bad1 = write_temp_config("nn = 64\n", "mikado_cfg_bad1.cfg");
  CHECK_THROWS(parse_config(bad1));
  std::remove(bad1.c_str());
  std::string bad2 = write_temp_config("n 64\n", "mikado_cfg_bad2.cfg");
  CHECK_THROWS(parse_config(bad2));
  std::remove(bad2.c_str());
  CHECK_THROWS(parse_config("/nonexistent/path.cfg"));
}

TEST_CASE("canonical serialization is stable and hash-sensitive") {
  RunConfig a, b;
  CHECK(a.canonical() == b.canonical());
  CHECK(fnv1a(a.canonical()) == fnv1a(b.canonical()));
  b.seed = a.seed + 1;
  CHECK(fnv1a(a.canonical()) != fnv1a(b.canonical()));
}

TEST_CASE("validate_config: hypothesis violations are surfaced by name") {
  RunConfig cfg;
  cfg.n_stages = 0;
  CHECK(validate_config(cfg).empty());

  RunConfig bad = cfg;
  bad.ptilde = 3.0;  // breaks the scaling hypothesis at d = 2, theta = 0
  auto errs = validate_config(bad);
  REQUIRE(!errs.empty());
  bool found = false;
  for (const auto& e : errs)
    if (e.find("hypothesis-scaling") != std::string::npos) found = true;
  CHECK(found);

  bad = cfg;
  bad.theta = 1.0;
  CHECK(!validate_config(bad).empty());

  bad = cfg;
  bad.n = 100;  // not a power of two
  CHECK(!validate_config(bad).empty());

  bad = cfg;
  bad.delta0 = 0.2;
  bad.n_stages = 2;  // 0.2 + 0.1 > 1/6
  bool found_delta = false;
  for (const auto& e : validate_config(bad))
    if (e.rfind("delta-sum", 0) == 0) found_delta = true;
  CHECK(found_delta);

  bad = cfg;
  bad.n = 64;
  bad.n_stages = 1;  // blocks cannot be resolved on n = 64
  bool found_res = false;
  for (const auto& e : validate_config(bad))
    if (e.rfind("resolution", 0) == 0) found_res = true;
  CHECK(found_res);
}

TEST_CASE("run_experiment: deterministic artifacts at n_stages = 0") {
  RunConfig cfg;
  cfg.n = 32;
  cfg.n_t = 256;
  cfg.n_stages = 0;
  cfg.n_omega = 2;
  cfg.calib_paths = 50;
  cfg.output_dir = "cli_test_run";
  fs::path root = fs::temp_directory_path() / "mikado_cli_test";
  fs::remove_all(root);

  RunResult r1 = run_experiment(cfg, root.string());
  REQUIRE(fs::exists(fs::path(r1.out_dir) / "summary.csv"));
  REQUIRE(fs::exists(fs::path(r1.out_dir) / "manifest.json"));
  std::string csv1 = slurp(fs::path(r1.out_dir) / "summary.csv");
  std::string manifest = slurp(fs::path(r1.out_dir) / "manifest.json");
  CHECK(manifest.find("config_hash") != std::string::npos);

  // With zero stages the triple is the initial one: residual at the
  // quadrature floor and a conclusive certificate.
  CHECK(r1.initial_residual < 1e-8);
  CHECK(r1.certificate.conclusive);
  CHECK(r1.exit_code == 0);

  fs::remove_all(fs::path(r1.out_dir));
  RunResult r2 = run_experiment(cfg, root.string());
  std::string csv2 = slurp(fs::path(r2.out_dir) / "summary.csv");
  CHECK(csv1 == csv2);  // byte-identical reruns
  fs::remove_all(root);
}

TEST_CASE("run_experiment: invalid config exits with code 2, writes nothing") {
  RunConfig cfg;
  cfg.ptilde = 3.0;
  cfg.output_dir = "cli_test_invalid";
  fs::path root = fs::temp_directory_path() / "mikado_cli_test2";
  fs::remove_all(root);
  RunResult r = run_experiment(cfg, root.string());
  CHECK(r.exit_code == 2);
  CHECK(!fs::exists(root / "cli_test_invalid" / "summary.csv"));
  fs::remove_all(root);
}

TEST_CASE("run_probe: known probes write CSVs, unknown probes fail") {
  RunConfig cfg;
  cfg.n = 32;
  cfg.n_t = 64;
  cfg.output_dir = "cli_test_probe";
  fs::path root = fs::temp_directory_path() / "mikado_cli_test3";
  fs::remove_all(root);
  CHECK(run_probe(cfg, "interpolation", root.string()) == 0);
  CHECK(fs::exists(root / "cli_test_probe" / "probe_interpolation.csv"));
  CHECK_THROWS(run_probe(cfg, "no_such_probe", root.string()));
  fs::remove_all(root);
}
