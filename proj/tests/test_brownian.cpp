//==============================================================================
// test_brownian.cpp
// Unit tests for the stochastic layer: seeded path sampling, the Holder
// seminorm, the stopping time, radius calibration, and path mollification.
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mikado/brownian.hpp"

using namespace mikado;

TEST_CASE("sample_path is deterministic in the seed and starts at zero") {
  BrownianPath a = sample_path(42, 257, 2);
  BrownianPath b = sample_path(42, 257, 2);
  BrownianPath c = sample_path(43, 257, 2);
  CHECK(a.vals == b.vals);
  CHECK(a.vals != c.vals);
  for (int ax = 0; ax < 2; ++ax) CHECK(a.vals[static_cast<size_t>(ax)][0] == 0.0);
  CHECK(a.times.front() == 0.0);
  CHECK(a.times.back() == doctest::Approx(1.0));
}

TEST_CASE("path interpolation is linear between nodes") {
  BrownianPath p = sample_path(7, 65, 1);
  double t0 = p.times[10], t1 = p.times[11];
  double tm = 0.5 * (t0 + t1);
  double expect = 0.5 * (p.vals[0][10] + p.vals[0][11]);
  CHECK(p.at(tm)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("increments have the Brownian variance scaling") {
  // Average squared increment over many paths at lag k dt should be k dt.
  const int n_t = 513;
  const double dt = 1.0 / (n_t - 1);
  double s1 = 0.0, s4 = 0.0;
  int c1 = 0, c4 = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    BrownianPath p = sample_path(1000 + seed, n_t, 1);
    for (int i = 0; i + 4 < n_t; i += 4) {
      double d1 = p.vals[0][static_cast<size_t>(i + 1)] - p.vals[0][static_cast<size_t>(i)];
      double d4 = p.vals[0][static_cast<size_t>(i + 4)] - p.vals[0][static_cast<size_t>(i)];
      s1 += d1 * d1;
      s4 += d4 * d4;
      ++c1;
      ++c4;
    }
  }
  CHECK(s1 / c1 == doctest::Approx(dt).epsilon(0.05));
  CHECK(s4 / c4 == doctest::Approx(4.0 * dt).epsilon(0.05));
}

TEST_CASE("holder_seminorm of a synthetic linear path is its slope") {
  BrownianPath p = sample_path(1, 33, 1);
  for (std::size_t i = 0; i < p.times.size(); ++i) p.vals[0][i] = 2.5 * p.times[i];
  // |B_t - B_r| / |t - r|^theta with theta < 1 is maximized at the full span.
  CHECK(holder_seminorm(p, 0.4) == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("stopping_time is monotone in the radius and hits 1 for huge L") {
  BrownianPath p = sample_path(5, 513, 2);
  double kappa = 0.02;
  StoppingData big = stopping_time(p, 100.0, kappa);
  CHECK(big.tau == doctest::Approx(1.0));
  StoppingData small = stopping_time(p, 0.05, kappa);
  StoppingData mid = stopping_time(p, 1.0, kappa);
  CHECK(small.tau <= mid.tau);
  CHECK(mid.tau <= big.tau);
}

TEST_CASE("calibrate_L is deterministic and achieves the target probability") {
  const double kappa = 0.02;
  double L1 = calibrate_L(0.9, kappa, 100, 257, 2);
  double L2 = calibrate_L(0.9, kappa, 100, 257, 2);
  CHECK(L1 == L2);
  // Fresh out-of-sample paths: the fraction surviving to tau = 1 should be
  // near the requested probability.
  int hits = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    BrownianPath p = sample_path(50000 + static_cast<std::uint64_t>(i), 257, 2);
    if (stopping_time(p, L1, kappa).tau >= 1.0) ++hits;
  }
  double frac = static_cast<double>(hits) / trials;
  CHECK(frac > 0.82);
  CHECK(frac < 0.97);
}

TEST_CASE("mollify_path converges to the path and bounds the derivative") {
  BrownianPath p = sample_path(9, 4097, 2);
  double hol = holder_seminorm(p, 0.4);
  double prev_err = -1.0;
  for (double ell : {0.02, 0.01, 0.005}) {
    MollifiedPath m = mollify_path(p, ell);
    double err = 0.0, dmax = 0.0;
    for (double t = 0.0; t <= 1.0; t += 1.0 / 512) {
      auto b = p.at(t);
      auto bm = m.at(t);
      auto dm = m.deriv_at(t);
      for (int a = 0; a < 2; ++a) {
        err = std::max(err, std::abs(b[static_cast<size_t>(a)] - bm[static_cast<size_t>(a)]));
        dmax = std::max(dmax, std::abs(dm[static_cast<size_t>(a)]));
      }
    }
    // Uniform error <= [B]_theta ell^theta; derivative <= C [B]_theta ell^{theta-1}.
    CHECK(err <= hol * std::pow(ell, 0.4) * 1.05);
    CHECK(dmax <= 4.0 * hol * std::pow(ell, 0.4 - 1.0));
    if (prev_err >= 0.0) CHECK(err <= prev_err * 1.05);
    prev_err = err;
  }
}

TEST_CASE("mollify_path rejects kernels narrower than the time step") {
  BrownianPath p = sample_path(3, 65, 1);  // dt = 1/64
  CHECK_THROWS(mollify_path(p, 0.01));
}
