//==============================================================================
// mikado_cli.cpp
// Command-line runner: validate configs, execute seeded experiment runs, and
// drive the standalone probe suites.  Exit codes: 0 pass, 1 contract failure,
// 2 configuration error.
//==============================================================================
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mikado/report.hpp"

namespace {

std::string output_root() {
  const char* env = std::getenv("MIKADO_OUTPUT_ROOT");
  return env ? std::string(env) : std::string();
}

int do_validate(const std::string& config_path) {
  mikado::RunConfig cfg = mikado::parse_config(config_path);
  auto errs = mikado::validate_config(cfg);
  if (!errs.empty()) {
    for (const auto& e : errs) std::fprintf(stderr, "invalid: %s\n", e.c_str());
    return 2;
  }
  mikado::Exponents ex =
      mikado::derive_exponents(cfg.p, cfg.ptilde, cfg.theta, cfg.d);
  std::printf("valid\n");
  std::printf("s      = %.9f\n", ex.s);
  std::printf("kappa  = %.9f\n", ex.kappa);
  std::printf("alpha  = %.9f\n", ex.alpha);
  std::printf("beta   = %.9f\n", ex.beta);
  std::printf("gamma  = %.9f\n", ex.gamma);
  std::printf("zeta   = %.9f\n", ex.zeta);
  std::printf("N      = %d\n", ex.N);
  return 0;
}

int do_run(const std::string& config_path) {
  mikado::RunConfig cfg = mikado::parse_config(config_path);
  auto errs = mikado::validate_config(cfg);
  if (!errs.empty()) {
    for (const auto& e : errs) std::fprintf(stderr, "invalid: %s\n", e.c_str());
    return 2;
  }
  mikado::RunResult res = mikado::run_experiment(cfg, output_root());
  std::printf("output: %s\n", res.out_dir.c_str());
  std::printf("initial residual: %.3e\n", res.initial_residual);
  for (std::size_t i = 0; i < res.stages.size(); ++i) {
    const auto& r = res.stages[i];
    std::printf(
        "stage %zu: lambda=%d R0=%.4f R1=%.4f rho_drift=%.4f momentum=%.4f "
        "u_drift=%.4f pass=%d\n",
        i + 1, r.params.lambda, r.R0_norm, r.R1_norm, r.rho_drift, r.momentum,
        r.u_drift, r.pass_all ? 1 : 0);
    if (!r.pass_all) {
      std::printf("  defect breakdown (C_tau L1, worst omega):\n");
      for (const auto& [name, v] : r.worst.norms)
        std::printf("    %-8s %.6f\n", name.c_str(), v);
    }
  }
  if (cfg.n_stages > 0)
    std::printf("certificate: %s (||rho(1)||_p >= %.4f on tau=1 paths, "
                "fraction %.2f)\n",
                res.certificate.conclusive ? "conclusive" : "inconclusive",
                res.certificate.final_lp_min, res.certificate.tau_one_fraction);
  return res.exit_code;
}

int do_probe(const std::string& config_path, const std::string& name) {
  mikado::RunConfig cfg = mikado::parse_config(config_path);
  auto errs = mikado::validate_config(cfg);
  if (!errs.empty()) {
    for (const auto& e : errs) std::fprintf(stderr, "invalid: %s\n", e.c_str());
    return 2;
  }
  return mikado::run_probe(cfg, name, output_root());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convex-integration experiment runner"};
  app.require_subcommand(1);

  std::string config_path, probe_name;
  auto* validate = app.add_subcommand("validate", "check a config and print derived exponents");
  validate->add_option("config", config_path)->required();
  auto* run = app.add_subcommand("run", "execute a seeded experiment run");
  run->add_option("config", config_path)->required();
  auto* probe = app.add_subcommand("probe", "run a standalone probe suite");
  probe->add_option("config", config_path)->required();
  probe->add_option("name", probe_name)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand(validate)) return do_validate(config_path);
    if (app.got_subcommand(run)) return do_run(config_path);
    if (app.got_subcommand(probe)) return do_probe(config_path, probe_name);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
