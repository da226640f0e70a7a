//==============================================================================
// test_iteration_stage.cpp
// Unit tests for a single convex-integration stage: the initial triple, the
// snapshot materializer, concrete parameter selection, the perturbation
// invariants, the named defect breakdown, and the stage contract machinery.
//
// Structural oracles used here:
//   - the initial triple satisfies d/dt rho = div R exactly (both sides are
//     closed forms in t times fixed spatial fields);
//   - div(u0 + w + w_c) vanishes to round-off by construction;
//   - every stochastic defect term carries a factor of B - B_ell or
//     dB_ell/dt, so a frozen zero path annihilates all five exactly;
//   - the breakdown must reassemble to the returned defect field.
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mikado/stage.hpp"

using namespace mikado;

namespace {

BrownianPath zero_path(int n_t, int d) {
  BrownianPath p = sample_path(0, n_t, d);
  for (auto& axis : p.vals)
    for (auto& v : axis) v = 0.0;
  return p;
}

}  // namespace

TEST_CASE("ramp: quintic switch with unit rise on [1/3, 2/3]") {
  CHECK(ramp_chi(0.0) == 0.0);
  CHECK(ramp_chi(1.0 / 3.0) == doctest::Approx(0.0));
  CHECK(ramp_chi(2.0 / 3.0) == doctest::Approx(1.0));
  CHECK(ramp_chi(1.0) == 1.0);
  // chi_dot integrates to chi(1) - chi(0) = 1 and matches the difference
  // quotient in the interior.
  const int m = 20000;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += ramp_chi_dot((i + 0.5) / m) / m;
  CHECK(acc == doctest::Approx(1.0).epsilon(1e-8));
  double h = 1e-6;
  for (double t : {0.4, 0.5, 0.61}) {
    double fd = (ramp_chi(t + h) - ramp_chi(t - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(ramp_chi_dot(t)).epsilon(1e-6));
  }
}

TEST_CASE("initial triple: normalization, support, and the exact defect") {
  GridSpec g{2, 64, 128};
  std::vector<BrownianPath> paths = {sample_path(21, g.n_t, g.d)};
  StageTriple tr = initial_stage(2.0, g, paths, 4.0, 0.02);

  ScalarField phi = initial_profile(g, 2.0);
  CHECK(lebesgue_norm(phi, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(phi.mean()) < 1e-14);

  CHECK(lebesgue_norm(tr.rho[0](0.2), kInf) == 0.0);
  CHECK(lebesgue_norm(tr.rho[0](0.9) - phi, kInf) < 1e-14);
  CHECK(lebesgue_norm(tr.R[0](0.1), kInf) == 0.0);
  CHECK(lebesgue_norm(tr.R[0](0.95), kInf) == 0.0);
  CHECK(u_field_is_zero(tr.u));

  // d/dt rho = div R at interior times (centered difference in t).
  const double h = 1e-5;
  for (double t : {0.45, 0.55}) {
    ScalarField dtrho = (tr.rho[0](t + h) - tr.rho[0](t - h)) * (0.5 / h);
    ScalarField divR = divergence(tr.R[0](t));
    CHECK(lebesgue_norm(dtrho - divR, kInf) < 1e-7);
  }
}

TEST_CASE("snapshot_time_field: exact on linear-in-time data, small otherwise") {
  GridSpec g{2, 32, 64};
  ScalarField base = random_band_limited(g, 4, 0xfeed);
  TimeScalarField lin(g, [base](double t) { return base * (2.0 * t - 0.5); });
  TimeScalarField snap = snapshot_time_field(lin, 17);
  for (double t : {0.0, 0.13, 0.5, 0.77, 1.0})
    CHECK(lebesgue_norm(snap(t) - lin(t), kInf) < 1e-12);

  TimeScalarField curved(g, [base](double t) { return base * std::sin(kTwoPi * t); });
  TimeScalarField snap2 = snapshot_time_field(curved, 129);
  double worst = 0.0;
  for (double t : {0.11, 0.37, 0.52, 0.93})
    worst = std::max(worst, lebesgue_norm(snap2(t) - curved(t), kInf));
  // 129 frames of a 1-periodic profile: O((2 pi / 128)^2 / 8) relative error.
  CHECK(worst < 5e-4 * lebesgue_norm(base, kInf));
}

TEST_CASE("concrete_parameters: feasible on n = 256, exhausted on n = 64") {
  Exponents theory = derive_exponents(2.0, 1.5, 0.0, 2);
  GridSpec fine{2, 256, 512};
  auto sp = concrete_parameters(fine, 1, theory, 0.1);
  REQUIRE(sp.has_value());
  CHECK(sp->lambda == 1);
  CHECK(sp->mu == 1);
  CHECK(sp->nu == 53);
  BlockParams probe;
  probe.lambda = sp->lambda;
  probe.mu = sp->mu;
  probe.nu = sp->nu;
  probe.s = sp->s;
  CHECK(blocks_resolved(fine, probe));

  GridSpec coarse{2, 64, 128};
  CHECK(!concrete_parameters(coarse, 1, theory, 0.1).has_value());
}

TEST_CASE("schedule_at_lambda reports the theoretical schedule as infeasible") {
  Exponents theory = derive_exponents(2.0, 1.5, 0.0, 2);
  GridSpec g{2, 256, 512};
  ScheduleFeasibility f = schedule_at_lambda(g, theory, 2);
  CHECK(!f.feasible);
  CHECK(!f.reason.empty());
}

TEST_CASE("stage algebra on the fine grid") {
  const GridSpec g{2, 256, 512};
  Exponents theory = derive_exponents(2.0, 1.5, 0.0, 2);
  StageParams sp = *concrete_parameters(g, 1, theory, 0.1);
  sp.sigma = 8.0;
  sp.ell = 0.01;
  sp.eps = 0.05;
  BlockSet blocks = BlockSet::make(g, sp);

  BrownianPath zb = zero_path(g.n_t, g.d);
  MollifiedPath zb_ell = mollify_path(zb, sp.ell);

  ScalarField phi = initial_profile(g, 2.0);
  VectorField pot = std_antidiv(phi);
  TimeScalarField rho = constant_in_time(g, phi);
  TimeVectorField R(g, [pot](double t) { return pot * (0.6 + 0.3 * std::sin(kTwoPi * t)); });
  auto moll = detail::mollify_inputs(rho, R, sp.eps, 1.0);

  Perturbations pert = build_perturbations(moll.R_eps, blocks, zb_ell);

  SUBCASE("perturbation invariants") {
    for (double t : {0.21, 0.58, 0.9}) {
      // Exact incompressibility of the full drift perturbation.
      VectorField wtot = pert.w(t) + pert.w_c(t);
      CHECK(lebesgue_norm(divergence(wtot), kInf) < 1e-10);
      // Mean correctors close the density bookkeeping.
      CHECK(std::abs(pert.vt(t).mean() + pert.vt_c(t)) < 1e-12);
      CHECK(std::abs(pert.q(t).mean() + pert.q_c(t)) < 1e-12);
    }
    // A vanishing defect produces vanishing density perturbations.
    TimeVectorField Rzero = constant_in_time(g, VectorField(g));
    Perturbations pz = build_perturbations(Rzero, blocks, zb_ell);
    CHECK(lebesgue_norm(pz.vt(0.4), kInf) == 0.0);
    CHECK(lebesgue_norm(pz.q(0.4), kInf) == 0.0);
  }

  SUBCASE("frozen zero path annihilates every stochastic term") {
    DefectInputs in;
    in.g = g;
    in.blocks = blocks;
    in.sp = sp;
    in.u0 = constant_in_time(g, VectorField(g));
    in.rho = rho;
    in.rho_eps = moll.rho_eps;
    in.R_eps = moll.R_eps;
    in.R_eps_dt = moll.R_eps_dt;
    in.pert = pert;
    in.B = zb;
    in.B_ell = zb_ell;
    in.tau = 1.0;
    in.u0_zero = true;
    auto [R1, bd] = compute_defects(in, {0.3, 0.7});
    for (const char* name : {"sto,1", "sto,2", "sto,3", "sto,4", "sto,5"})
      CHECK(bd.at(name) < 1e-13);
    CHECK(bd.at("com") == 0.0);
    CHECK(bd.reassembly_gap < 1e-10);
    CHECK(bd.total > 0.0);
  }
}

TEST_CASE("run_stage contract on the desk grid (single path)") {
  const GridSpec g{2, 256, 512};
  StageConfig cfg;
  cfg.p = 2.0;
  cfg.ptilde = 1.5;
  cfg.theta = 0.0;
  cfg.kappa = 0.02;
  cfg.L = calibrate_L(0.9, cfg.kappa, 100, g.n_t, g.d);
  cfg.paths = {sample_path(1234, g.n_t, g.d)};
  cfg.n_time_samples = 9;
  cfg.lambda_max = 1;
  StageTriple init = initial_stage(cfg.p, g, cfg.paths, cfg.L, cfg.kappa);

  auto [next, rep] = run_stage(init, 0.08, cfg);

  CHECK(rep.params.lambda == 1);
  CHECK(rep.R0_norm > 0.0);
  CHECK(rep.R1_norm > 0.0);
  CHECK(rep.per_omega.size() == 1);
  // Structure: exact incompressibility, mean conservation, and the vanishing
  // window near t = 0 survive the perturbation.
  CHECK(rep.div_u1 < 1e-10);
  CHECK(rep.mean_drift < 1e-12);
  CHECK(rep.vanish_ok);
  // The momentum contract is achievable at this scale and must hold.
  CHECK(rep.pass_mom);
  // The breakdown reassembles the defect it reports.
  CHECK(rep.worst.reassembly_gap < 1e-8 * std::max(1.0, rep.R1_norm));
  // The new triple is well-formed.
  CHECK(next.n_omega() == 1);
  CHECK(next.rho.size() == 1);
  CHECK(lebesgue_norm(next.rho[0](0.01), kInf) < 1e-10);
}

TEST_CASE("run_iteration rejects delta budgets outside the contract") {
  GridSpec g{2, 64, 128};
  StageConfig cfg;
  cfg.paths = {sample_path(3, g.n_t, g.d)};
  StageTriple init = initial_stage(2.0, g, cfg.paths, 4.0, 0.02);
  CHECK_THROWS(run_iteration(init, {0.1, 0.1}, cfg));
}
