//==============================================================================
// test_antidivergence.cpp
// Unit tests for the two antidivergence operators:
//   std_antidiv      spectral div^{-1} grad Delta^{-1}: div o div^{-1} = id on
//                    mean-zero fields (up to Nyquist-trimmed round-off)
//   improved_antidiv the bilinear order-N operator R_N(f, g_lambda) whose
//                    divergence reproduces f g_lambda - mean and whose norm
//                    decays like lambda^{-N} in the oscillation frequency
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mikado/antidivergence.hpp"
#include "mikado/grid.hpp"

using namespace mikado;

namespace {
GridSpec grid2(int n) { return GridSpec{2, n}; }
}  // namespace

TEST_CASE("std_antidiv: div recovers the input on band-limited mean-zero data") {
  GridSpec g = grid2(64);
  ScalarField f = detail::remove_mean(random_band_limited(g, 10, 0xa5a5));
  VectorField v = std_antidiv(f);
  double err = lebesgue_norm(divergence(v) - f, kInf);
  CHECK(err < 1e-9);
}

TEST_CASE("std_antidiv rejects data with nonzero mean") {
  GridSpec g = grid2(32);
  ScalarField f = random_band_limited(g, 4, 7);
  f += 0.5;
  CHECK_THROWS(std_antidiv(f));
}

TEST_CASE("std_antidiv is linear") {
  GridSpec g = grid2(32);
  ScalarField a = detail::remove_mean(random_band_limited(g, 5, 1));
  ScalarField b = detail::remove_mean(random_band_limited(g, 5, 2));
  VectorField lhs = std_antidiv(a + b * 2.0);
  VectorField rhs = std_antidiv(a) + std_antidiv(b) * 2.0;
  CHECK(lebesgue_norm(lhs - rhs, kInf) < 1e-11);
}

TEST_CASE("std_antidiv on a single mode matches the closed form") {
  GridSpec g = grid2(64);
  // f = cos(2 pi k x1), k = 3: div^{-1} f = (1 / 2 pi k) sin(2 pi k x1) e_1.
  ScalarField f = ScalarField::sample(
      g, [](const std::vector<double>& x) { return std::cos(kTwoPi * 3.0 * x[0]); });
  VectorField v = std_antidiv(f);
  ScalarField e1 = ScalarField::sample(g, [](const std::vector<double>& x) {
    return std::sin(kTwoPi * 3.0 * x[0]) / (kTwoPi * 3.0);
  });
  CHECK(lebesgue_norm(v[0] - e1, kInf) < 1e-12);
  CHECK(lebesgue_norm(v[1], kInf) < 1e-13);
}

TEST_CASE("improved_antidiv: divergence identity at several orders") {
  GridSpec g = grid2(128);
  ScalarField f = random_band_limited(g, 3, 0x11);
  ScalarField osc = ScalarField::sample(
      g, [](const std::vector<double>& x) { return std::cos(kTwoPi * 24.0 * x[0]); });
  for (int N : {1, 2, 3}) {
    VectorField R = improved_antidiv(f, osc, AntidivOrder(N), 1e-6);
    ScalarField prod = detail::remove_mean(pointwise(f, osc));
    double err = lebesgue_norm(divergence(R) - prod, kInf);
    CHECK(err < 1e-7);
  }
}

TEST_CASE("improved_antidiv decays in the oscillation frequency") {
  GridSpec g = grid2(256);
  ScalarField f = random_band_limited(g, 3, 0x22);
  ScalarField osc = ScalarField::sample(
      g, [](const std::vector<double>& x) { return std::cos(kTwoPi * x[0]); });
  std::vector<int> lambdas = {8, 16, 32, 64};
  for (int N : {1, 2}) {
    DecayProbeReport rep = antidiv_decay_probe(f, osc, lambdas, AntidivOrder(N), 2.0);
    CHECK(!rep.degenerate);
    // Leading gain is one inverse power of the oscillation frequency.
    CHECK(rep.fitted_slope == doctest::Approx(rep.predicted_slope).epsilon(0.25));
  }
}

TEST_CASE("improved_antidiv beats the standard operator on fast oscillations") {
  GridSpec g = grid2(256);
  ScalarField f = random_band_limited(g, 2, 0x33);
  ScalarField osc = ScalarField::sample(
      g, [](const std::vector<double>& x) { return std::cos(kTwoPi * 48.0 * x[1]); });
  ScalarField prod = detail::remove_mean(pointwise(f, osc));
  VectorField r_std = std_antidiv(prod);
  VectorField r_imp = improved_antidiv(f, osc, AntidivOrder(2), 1e-6);
  // The improved operator concentrates the gain of the 1/lambda factors.
  CHECK(lebesgue_norm(r_imp, 2.0) < lebesgue_norm(r_std, 2.0) * 1.5);
  CHECK(lebesgue_norm(divergence(r_imp) - prod, kInf) < 1e-7);
}
