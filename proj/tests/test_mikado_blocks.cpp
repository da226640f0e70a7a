//==============================================================================
// test_mikado_blocks.cpp
// Unit tests for the deterministic building blocks: structural identities,
// interaction geometry, normalization, time transport, shift composition, and
// the scaling-exponent probes.
//
// Grid: n = 256 (the smallest resolution on which blocks_resolved admits the
// full random parameter range). Identity tolerances follow the calibrated
// guard in blocks_resolved: 1e-8.
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mikado/blocks.hpp"
#include "mikado/grid.hpp"

using namespace mikado;

namespace {
const GridSpec g{2, 256};
const BlobProfile prof(2);
}  // namespace

TEST_CASE("block parameter validation rejects malformed tuples") {
  BlockParams p;
  p.lambda = 2;
  p.mu = 2;
  p.nu = 12;
  p.validate(2);
  BlockParams bad = p;
  bad.nu = 13;  // not a multiple of lambda
  CHECK_THROWS(bad.validate(2));
  bad = p;
  bad.nu = 6;  // lambda mu / nu > 1/2
  CHECK_THROWS(bad.validate(2));
  bad = p;
  bad.j = 3;  // direction out of range in d = 2
  CHECK_THROWS(bad.validate(2));
  bad = p;
  bad.s = 1.0;
  CHECK_THROWS(bad.validate(2));
}

TEST_CASE("structural identities hold for random admissible parameters") {
  // Three identities per draw: interaction mean Theta.W = e_j, the quadratic
  // density consistency, and the potential A_N divergence relation.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    BlockParams p = admissible_block_params(g, seed);
    IdentityReport rep = mikado_identity_check(g, prof, p, {0.0, 0.37, 0.8});
    CHECK(rep.continuity < 1e-8);
    CHECK(rep.potential < 1e-8);
    CHECK(rep.corrector < 1e-8);
  }
}

TEST_CASE("cross-direction supports are exactly disjoint") {
  // The shift lattice keeps distinct families at torus distance > 2R, and all
  // samplers evaluate the compactly supported profile in closed form, so the
  // product Theta^1 . W^2 vanishes at every grid point exactly.
  BlockParams p1 = admissible_block_params(g, 11);
  BlockParams p2 = p1;
  p1.j = 1;
  p2.j = 2;
  for (double t : {0.0, 0.29, 0.63}) {
    ScalarField th = theta(g, prof, p1, t, zero_shift(g));
    VectorField w = mikado_W(g, prof, p2, t, zero_shift(g));
    double worst = 0.0;
    for (std::size_t i = 0; i < th.values.size(); ++i)
      for (int a = 0; a < g.d; ++a)
        worst = std::max(worst, std::abs(th.values[i] * w[a].values[i]));
    CHECK(worst == 0.0);
  }
}

TEST_CASE("interaction mean: cell average of Theta^j W^j is e_j") {
  BlockParams p = admissible_block_params(g, 4);
  for (int j = 1; j <= 2; ++j) {
    BlockParams pj = p;
    pj.j = j;
    ScalarField th = theta(g, prof, pj, 0.41, zero_shift(g));
    VectorField w = mikado_W(g, prof, pj, 0.41, zero_shift(g));
    for (int a = 0; a < g.d; ++a) {
      double m = pointwise(th, w[a]).mean();
      double expect = (a == j - 1) ? 1.0 : 0.0;
      CHECK(std::abs(m - expect) < 1e-8);
    }
  }
}

TEST_CASE("time transport: Theta^j(t) is Theta^j(0) translated by sigma t e_j") {
  BlockParams p = admissible_block_params(g, 5);
  const double t = 0.3;
  ScalarField a = theta(g, prof, p, t, zero_shift(g));
  std::vector<double> shift(2, 0.0);
  shift[static_cast<size_t>(p.j - 1)] = p.sigma * t;
  ScalarField b = translate(theta(g, prof, p, 0.0, zero_shift(g)), shift);
  // translate() is spectral while the sampler is closed-form; the profile
  // spectrum tails set the matching accuracy.
  CHECK(lebesgue_norm(a - b, kInf) < 1e-6 * lebesgue_norm(a, kInf));
}

TEST_CASE("shift composition: extra shift a equals sampling at x + a") {
  BlockParams p = admissible_block_params(g, 6);
  std::vector<double> a = {0.137, -0.21};
  ScalarField direct = theta(g, prof, p, 0.52, a);
  ScalarField moved = translate(theta(g, prof, p, 0.52, zero_shift(g)),
                                std::vector<double>{-a[0], -a[1]});
  CHECK(lebesgue_norm(direct - moved, kInf) < 1e-6 * lebesgue_norm(direct, kInf));
}

TEST_CASE("concentration scaling of the density and field norms") {
  // ||Theta^j||_{L^s} and ||W^j||_{L^{s'}} are mu-independent by design;
  // ||Theta^j||_{L^r} scales like mu^{d/s - d/r}.
  BlockParams p;
  p.lambda = 1;
  p.nu = 48;
  p.sigma = 2.0;
  p.s = 2.5;
  p.j = 1;
  p.N = 1;
  std::vector<double> norm_s, norm_1;
  for (int mu : {1, 2, 4}) {
    p.mu = mu;
    p.validate(g.d);  // norms come from the closed-form sampler, so the sweep
                      // may exceed the spectral identity guard blocks_resolved
    ScalarField th = theta(g, prof, p, 0.0, zero_shift(g));
    norm_s.push_back(lebesgue_norm(th, p.s));
    norm_1.push_back(lebesgue_norm(th, 1.0));
  }
  CHECK(norm_s[2] == doctest::Approx(norm_s[0]).epsilon(0.02));
  // L1 decays like mu^{d/s - d} = mu^{-6/5}.
  double slope = loglog_slope({1.0, 2.0, 4.0}, norm_1);
  CHECK(slope == doctest::Approx(2.0 / 2.5 - 2.0).epsilon(0.06));
}

TEST_CASE("slope probes recover the predicted exponents") {
  BlockParams base = admissible_block_params(g, 9);
  base.lambda = 1;
  base.mu = 2;
  base.nu = 48;
  SweepAxis axis = SweepAxis::mu;
  std::vector<double> sweep = {2, 3, 4, 6};
  for (BlockFamily fam : {BlockFamily::theta, BlockFamily::field}) {
    SlopeReport rep = mikado_estimate_probe(g, prof, base, fam, axis, sweep, 0, 2.0);
    CHECK(std::abs(rep.fitted - rep.predicted) < 0.15);
  }
}

TEST_CASE("mikado_phi_pair has unit mean") {
  BlockParams p = admissible_block_params(g, 10);
  ScalarField pair = mikado_phi_pair(g, prof, p, 0.33, zero_shift(g));
  CHECK(pair.mean() == doctest::Approx(1.0).epsilon(1e-8));
}
