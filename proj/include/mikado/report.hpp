//==============================================================================
// report.hpp
// Experiment orchestration: configuration parsing and validation, seeded
// reproducible runs, per-stage JSON reports, summary CSV, manifest, and the
// standalone probe suites.
//
// Config format: flat key = value lines, '#' comments.  Output layout: one
// directory per run with stage_<n>.json, summary.csv, manifest.json, and
// certificate.json.  The manifest records the config hash, all seeds, and
// toolchain versions; two runs from the same manifest are bit-identical.
//==============================================================================
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "brownian.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "stage.hpp"
#include "verify.hpp"

namespace mikado {

//------------------------------------------------------------------------------
// RunConfig.
//------------------------------------------------------------------------------
struct RunConfig {
  int d = 2, n = 256, n_t = 512;
  double p = 2.0, ptilde = 1.5, theta = 0.0;
  double prob = 0.9;  // target P(tau_L = 1)
  int n_stages = 2;
  int n_omega = 8;
  double delta0 = 0.08, delta_ratio = 0.5;  // geometric delta sequence
  std::uint64_t seed = 1234;
  bool diffusion = false;
  std::string output_dir = "runs/out";
  int lambda_max = 8;
  int n_time_samples = 17;
  int n_snapshots_rho = 129, n_snapshots_R = 65;
  int calib_paths = 200;  // ensemble size for calibrate_L

  std::vector<double> deltas() const {
    std::vector<double> out;
    double dlt = delta0;
    for (int i = 0; i < n_stages; ++i, dlt *= delta_ratio) out.push_back(dlt);
    return out;
  }

  // Canonical serialization: fixed key order, used for hashing and manifests.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "d = " << d << "\nn = " << n << "\nn_t = " << n_t << "\np = " << p
       << "\nptilde = " << ptilde << "\ntheta = " << theta
       << "\nprob = " << prob << "\nn_stages = " << n_stages
       << "\nn_omega = " << n_omega << "\ndelta0 = " << delta0
       << "\ndelta_ratio = " << delta_ratio << "\nseed = " << seed
       << "\ndiffusion = " << (diffusion ? "true" : "false")
       << "\noutput_dir = " << output_dir << "\nlambda_max = " << lambda_max
       << "\nn_time_samples = " << n_time_samples
       << "\nn_snapshots_rho = " << n_snapshots_rho
       << "\nn_snapshots_R = " << n_snapshots_R
       << "\ncalib_paths = " << calib_paths << "\n";
    return os.str();
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "d") cfg.d = std::stoi(val);
      else if (key == "n") cfg.n = std::stoi(val);
      else if (key == "n_t") cfg.n_t = std::stoi(val);
      else if (key == "p") cfg.p = std::stod(val);
      else if (key == "ptilde") cfg.ptilde = std::stod(val);
      else if (key == "theta") cfg.theta = std::stod(val);
      else if (key == "prob") cfg.prob = std::stod(val);
      else if (key == "n_stages") cfg.n_stages = std::stoi(val);
      else if (key == "n_omega") cfg.n_omega = std::stoi(val);
      else if (key == "delta0") cfg.delta0 = std::stod(val);
      else if (key == "delta_ratio") cfg.delta_ratio = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "diffusion") cfg.diffusion = (val == "true" || val == "1");
      else if (key == "output_dir") cfg.output_dir = val;
      else if (key == "lambda_max") cfg.lambda_max = std::stoi(val);
      else if (key == "n_time_samples") cfg.n_time_samples = std::stoi(val);
      else if (key == "n_snapshots_rho") cfg.n_snapshots_rho = std::stoi(val);
      else if (key == "n_snapshots_R") cfg.n_snapshots_R = std::stoi(val);
      else if (key == "calib_paths") cfg.calib_paths = std::stoi(val);
      else throw std::runtime_error("unknown key");
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               key + ": " + e.what());
    }
  }
  return cfg;
}

// Named violations; empty means valid.  Prints nothing — callers report.
inline std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> errs = check_hypotheses(cfg.p, cfg.ptilde, cfg.theta, cfg.d);
  if (cfg.n < 8 || (cfg.n & (cfg.n - 1)) != 0)
    errs.push_back("grid: n must be a power of two >= 8");
  if (cfg.n_t < 8) errs.push_back("grid: n_t must be >= 8");
  if (cfg.n_omega < 1) errs.push_back("ensemble: n_omega must be >= 1");
  if (cfg.prob < 0.0 || cfg.prob >= 1.0)
    errs.push_back("stopping: prob must lie in [0, 1)");
  double dsum = 0.0;
  for (double dlt : cfg.deltas()) dsum += dlt;
  if (!(dsum < 1.0 / 6.0))
    errs.push_back("delta-sum: sum of deltas must stay below 1/6");
  if (cfg.n_stages > 0 && errs.empty()) {
    GridSpec g(cfg.d, cfg.n, cfg.n_t);
    Exponents ex = derive_exponents(cfg.p, cfg.ptilde, cfg.theta, cfg.d);
    if (!concrete_parameters(g, 1, ex, cfg.delta0))
      errs.push_back(
          "resolution: grid cannot resolve the first stage's blocks (needs "
          "lambda mu * 75 + nu <= n/2 with nu >= 24 lambda mu)");
  }
  return errs;
}

//------------------------------------------------------------------------------
// JSON serialization.
//------------------------------------------------------------------------------
inline nlohmann::json to_json(const StageParams& sp) {
  return {{"delta", sp.delta},   {"eps", sp.eps},     {"ell", sp.ell},
          {"lambda", sp.lambda}, {"mu", sp.mu},       {"sigma", sp.sigma},
          {"nu", sp.nu},         {"N", sp.N},         {"s", sp.s},
          {"kappa", sp.kappa},
          {"theory",
           {{"s", sp.theory.s},
            {"kappa", sp.theory.kappa},
            {"alpha", sp.theory.alpha},
            {"beta", sp.theory.beta},
            {"gamma", sp.theory.gamma},
            {"zeta", sp.theory.zeta},
            {"N", sp.theory.N}}}};
}

inline nlohmann::json to_json(const DefectBreakdown& bd) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [name, v] : bd.norms) terms[name] = v;
  return {{"terms", terms}, {"total", bd.total}};
}

inline nlohmann::json to_json(const ContractReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& bd : r.per_omega) per.push_back(to_json(bd));
  return {{"params", to_json(r.params)},
          {"R0_norm", r.R0_norm},
          {"R1_norm", r.R1_norm},
          {"rho_drift", r.rho_drift},
          {"momentum", r.momentum},
          {"u_drift", r.u_drift},
          {"m_used", r.m_used},
          {"div_u1", r.div_u1},
          {"u_omega_spread", r.u_omega_spread},
          {"mean_drift", r.mean_drift},
          {"vanish_sup", r.vanish_sup},
          {"eps_measurements",
           {{"rho", r.eps_rho}, {"com", r.eps_com}, {"momentum", r.eps_mom}}},
          {"pass",
           {{"rho_drift", r.pass_rho},
            {"momentum", r.pass_mom},
            {"u_drift", r.pass_u},
            {"R1", r.pass_R},
            {"vanishing_window", r.vanish_ok},
            {"all", r.pass_all}}},
          {"lambda_attempts", r.lambda_attempts},
          {"resolution_exhausted", r.resolution_exhausted},
          {"worst_breakdown", to_json(r.worst)},
          {"per_omega", per}};
}

inline nlohmann::json to_json(const NonuniquenessCertificate& c) {
  return {{"rho_initial_sup", c.rho_initial_sup},
          {"final_lp_min", c.final_lp_min},
          {"tau_one_fraction", c.tau_one_fraction},
          {"max_ste_residual", c.max_ste_residual},
          {"max_ste_residual_zero", c.max_ste_residual_zero},
          {"rho_u_l1", c.rho_u_l1},
          {"conclusive", c.conclusive},
          {"note", c.note}};
}

//------------------------------------------------------------------------------
// Run orchestration.
//------------------------------------------------------------------------------
namespace detail {

inline const std::vector<std::string>& defect_columns(bool diffusion) {
  static const std::vector<std::string> base = {
      "com",   "quadr,1", "quadr,2", "time,1", "time,2", "time,3", "sto,1",
      "sto,2", "sto,3",   "sto,4",   "sto,5",  "lin",    "q",      "corr"};
  static const std::vector<std::string> with_diff = [] {
    auto v = base;
    v.push_back("diff");
    return v;
  }();
  return diffusion ? with_diff : base;
}

inline std::string csv_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

struct RunResult {
  int exit_code = 0;
  std::vector<ContractReport> stages;
  NonuniquenessCertificate certificate;
  double initial_residual = 0.0;
  std::string out_dir;
};

inline RunResult run_experiment(const RunConfig& cfg,
                                const std::string& output_root = "") {
  namespace fs = std::filesystem;
  RunResult result;
  auto errs = validate_config(cfg);
  if (!errs.empty()) {
    result.exit_code = 2;
    return result;
  }
  fs::path out = cfg.output_dir;
  if (!output_root.empty()) out = fs::path(output_root) / out;
  fs::create_directories(out);
  result.out_dir = out.string();

  GridSpec g(cfg.d, cfg.n, cfg.n_t);
  Exponents ex = derive_exponents(cfg.p, cfg.ptilde, cfg.theta, cfg.d);

  // Seeded ensemble and calibrated stopping threshold.
  std::vector<BrownianPath> paths;
  for (int i = 0; i < cfg.n_omega; ++i)
    paths.push_back(sample_path(cfg.seed + static_cast<std::uint64_t>(i),
                                cfg.n_t, cfg.d));
  const double L =
      calibrate_L(cfg.prob, ex.kappa, cfg.calib_paths, cfg.n_t, cfg.d,
                  cfg.seed ^ 0x5eedca11ull);

  StageTriple init = initial_stage(cfg.p, g, paths, L, ex.kappa);

  // Initial residual against the full bank (shared across omega: u = 0).
  TestFunctionBank bank = TestFunctionBank::make(g);
  {
    auto res = continuity_defect_residuals(init.rho[0], init.u, init.R[0],
                                           paths[0], bank, 1.0, 4096);
    for (double r : res)
      result.initial_residual = std::max(result.initial_residual, r);
  }

  StageConfig scfg;
  scfg.p = cfg.p;
  scfg.ptilde = cfg.ptilde;
  scfg.theta = cfg.theta;
  scfg.paths = paths;
  scfg.L = L;
  scfg.kappa = ex.kappa;
  scfg.n_time_samples = cfg.n_time_samples;
  scfg.lambda_max = cfg.lambda_max;
  scfg.diffusion = cfg.diffusion;
  scfg.n_snapshots_rho = cfg.n_snapshots_rho;
  scfg.n_snapshots_R = cfg.n_snapshots_R;

  std::vector<StageTriple> traj{init};
  IterationReport irep;
  if (cfg.n_stages > 0) {
    auto [tj, ir] = run_iteration(init, cfg.deltas(), scfg);
    traj = std::move(tj);
    irep = std::move(ir);
    result.stages = irep.stages;
  }

  // Per-stage JSON.
  for (std::size_t i = 0; i < result.stages.size(); ++i) {
    std::ofstream js(out / ("stage_" + std::to_string(i + 1) + ".json"));
    js << to_json(result.stages[i]).dump(2) << "\n";
  }

  // Summary CSV: fixed columns, one row per stage (stage 0 = initial data).
  {
    std::ofstream csv(out / "summary.csv");
    csv << "stage,lambda,mu,nu,sigma,ell,eps,R0,R1,rho_drift,momentum,u_drift,"
           "div_u1,mean_drift";
    for (const auto& c : detail::defect_columns(cfg.diffusion)) {
      std::string h = c;
      for (char& ch : h)
        if (ch == ',') ch = '_';
      csv << "," << h;
    }
    csv << "\n";
    {
      const std::vector<double> times = sampled_times(g.n_t, cfg.n_time_samples);
      double r0 = 0.0;
      for (int w = 0; w < init.n_omega(); ++w)
        r0 = std::max(r0, ct_norm(init.R[static_cast<size_t>(w)], times, 1.0,
                                  init.tau[static_cast<size_t>(w)]));
      csv << "0,0,0,0,0,0,0," << detail::csv_num(r0) << ","
          << detail::csv_num(result.initial_residual) << ",0,0,0,0,0";
      for (std::size_t i = 0; i < detail::defect_columns(cfg.diffusion).size(); ++i)
        csv << ",0";
      csv << "\n";
    }
    for (std::size_t i = 0; i < result.stages.size(); ++i) {
      const ContractReport& r = result.stages[i];
      csv << (i + 1) << "," << r.params.lambda << "," << r.params.mu << ","
          << r.params.nu << "," << detail::csv_num(r.params.sigma) << ","
          << detail::csv_num(r.params.ell) << "," << detail::csv_num(r.params.eps)
          << "," << detail::csv_num(r.R0_norm) << "," << detail::csv_num(r.R1_norm)
          << "," << detail::csv_num(r.rho_drift) << ","
          << detail::csv_num(r.momentum) << "," << detail::csv_num(r.u_drift)
          << "," << detail::csv_num(r.div_u1) << ","
          << detail::csv_num(r.mean_drift);
      for (const auto& c : detail::defect_columns(cfg.diffusion)) {
        double v = 0.0;
        for (const auto& [name, x] : r.worst.norms)
          if (name == c) v = x;
        csv << "," << detail::csv_num(v);
      }
      csv << "\n";
    }
  }

  // Nonuniqueness certificate on the final triple (the initial triple when
  // no stages are requested: it already exhibits a nonzero endpoint from
  // exactly zero initial data).
  if (!traj.empty()) {
    result.certificate =
        nonuniqueness_exhibit(traj.back(), paths, cfg.p, bank, 0, 1.0);
    std::ofstream js(out / "certificate.json");
    js << to_json(result.certificate).dump(2) << "\n";
  }

  // Manifest.
  {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& p : paths) seeds.push_back(p.seed);
    nlohmann::json m = {
        {"config", cfg.canonical()},
        {"config_hash", fnv1a(cfg.canonical())},
        {"path_seeds", seeds},
        {"calibration_seed", cfg.seed ^ 0x5eedca11ull},
        {"stopping_threshold_L", L},
        {"initial_residual", result.initial_residual},
        {"versions",
         {{"compiler", __VERSION__},
          {"cxx_standard", static_cast<long>(__cplusplus)}}}};
    std::ofstream js(out / "manifest.json");
    js << m.dump(2) << "\n";
  }

  bool all_pass = true;
  for (const auto& r : result.stages)
    if (!r.pass_all) all_pass = false;
  if (!result.certificate.conclusive) all_pass = false;
  result.exit_code = all_pass ? 0 : 1;
  return result;
}

//------------------------------------------------------------------------------
// Probe suites (standalone CSV reports).
//------------------------------------------------------------------------------
inline int run_probe(const RunConfig& cfg, const std::string& which,
                     const std::string& output_root = "") {
  namespace fs = std::filesystem;
  fs::path out = cfg.output_dir;
  if (!output_root.empty()) out = fs::path(output_root) / out;
  fs::create_directories(out);
  GridSpec g(cfg.d, cfg.n, cfg.n_t);
  BlobProfile prof(cfg.d);
  std::ofstream csv(out / ("probe_" + which + ".csv"));

  if (which == "mikado") {
    csv << "kind,seed_or_family,axis,k,r,continuity,potential,corrector,"
           "predicted,fitted\n";
    const std::vector<double> ts = {0.0, 0.23, 0.57, 1.0};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      BlockParams p = admissible_block_params(g, seed);
      auto rep = mikado_identity_check(g, prof, p, ts);
      csv << "identity," << seed << ",,,," << rep.continuity << ","
          << rep.potential << "," << rep.corrector << ",,\n";
    }
    BlockParams base = admissible_block_params(g, 1);
    struct Case {
      BlockFamily fam;
      const char* name;
      SweepAxis axis;
      const char* axis_name;
      std::vector<double> sweep;
      int k;
      double r;
    };
    std::vector<Case> cases = {
        {BlockFamily::theta, "theta", SweepAxis::mu, "mu", {2, 3, 4, 6}, 0, 2.0},
        {BlockFamily::field, "field", SweepAxis::mu, "mu", {2, 3, 4, 6}, 0, 2.0},
        {BlockFamily::quadratic, "quadratic", SweepAxis::sigma, "sigma",
         {1, 2, 4, 8}, 0, 2.0},
        {BlockFamily::corrector, "corrector", SweepAxis::nu, "nu",
         {24, 32, 40, 48}, 0, 2.0},
        {BlockFamily::potential, "potential", SweepAxis::sigma, "sigma",
         {1, 2, 4, 8}, 0, 1.0},
    };
    for (const auto& c : cases) {
      auto rep = mikado_estimate_probe(g, prof, base, c.fam, c.axis, c.sweep,
                                       c.k, c.r);
      csv << "slope," << c.name << "," << c.axis_name << "," << c.k << ","
          << c.r << ",,,," << rep.predicted << "," << rep.fitted << "\n";
    }
    return 0;
  }
  if (which == "antidiv") {
    csv << "lambda,norm,fitted,predicted\n";
    ScalarField f = random_band_limited(g, 4, cfg.seed);
    ScalarField h = random_band_limited(g, 2, cfg.seed + 1);
    auto rep = antidiv_decay_probe(f, h, {8, 16, 32, 64}, AntidivOrder(1));
    for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
      csv << rep.lambdas[i] << "," << rep.norms[i] << ","
          << (i + 1 == rep.lambdas.size() ? rep.fitted_slope : 0.0) << ","
          << rep.predicted_slope << "\n";
    return 0;
  }
  if (which == "brownian") {
    csv << "prob,L,hit_fraction\n";
    Exponents ex = derive_exponents(cfg.p, cfg.ptilde, cfg.theta, cfg.d);
    for (double pr : {0.5, 0.9, 0.99}) {
      double L = calibrate_L(pr, ex.kappa, cfg.calib_paths, cfg.n_t, cfg.d,
                             cfg.seed ^ 0x5eedca11ull);
      int hits = 0;
      const int fresh = 500;
      for (int i = 0; i < fresh; ++i) {
        BrownianPath p = sample_path(cfg.seed + 10000 + static_cast<std::uint64_t>(i),
                                     cfg.n_t, cfg.d);
        if (stopping_time(p, L, ex.kappa).tau >= 1.0 - 1e-12) ++hits;
      }
      csv << pr << "," << L << "," << static_cast<double>(hits) / fresh << "\n";
    }
    return 0;
  }
  if (which == "interpolation") {
    csv << "theta,q,n_fields,C\n";
    for (auto [th, q] : std::vector<std::pair<double, double>>{{0.3, 1.5}, {0.7, 2.0}})
      for (int nf : {100, 200})
        csv << th << "," << q << "," << nf << ","
            << interpolation_check(g, th, q, nf, 8, cfg.seed) << "\n";
    return 0;
  }
  if (which == "holder") {
    csv << "pair,r,c_fit,slope,pass\n";
    for (int i = 0; i < 8; ++i) {
      ScalarField f = random_band_limited(g, 3, cfg.seed + static_cast<std::uint64_t>(i));
      ScalarField h = random_band_limited(g, 2, cfg.seed + 100 + static_cast<std::uint64_t>(i));
      for (double r : {1.0, 2.0}) {
        auto rep = improved_holder_check(f, h, {4, 8, 16, 32}, r);
        csv << i << "," << r << "," << rep.c_fit << "," << rep.slope << ","
            << rep.pass << "\n";
      }
    }
    return 0;
  }
  throw std::invalid_argument("unknown probe: " + which);
}

}  // namespace mikado
