//==============================================================================
// test_params.cpp
// Unit tests for the exponent bookkeeping: hypothesis checks, the closed-form
// concentration exponent and stopping exponent, and the full derived tuple.
//
// The numeric fixtures below were computed independently (exact rational
// arithmetic for s and kappa; high-precision evaluation of the inequality
// chain for the remaining exponents) and are frozen here as oracles.
//==============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <tuple>
#include <vector>

#include "mikado/params.hpp"

using namespace mikado;

TEST_CASE("hypothesis check accepts the desk-scale configuration") {
  CHECK(check_hypotheses(2, 1.5, 0.0, 2.0).empty());
  CHECK(check_hypotheses(2, 5.0 / 3.0, 0.0, 2.0).empty());
  CHECK(check_hypotheses(2.0, 1.2, 0.2, 3).empty());
}

TEST_CASE("hypothesis check names violations") {
  // ptilde = 3 at d = 2, theta = 0 violates the scaling relation.
  auto v = check_hypotheses(2, 3.0, 0.0, 2.0);
  CHECK(!v.empty());
  bool found = false;
  for (const auto& msg : v)
    if (msg.find("hypothesis-scaling") != std::string::npos) found = true;
  CHECK(found);
  // theta = 1 is outside the admissible smoothness window.
  CHECK(!check_hypotheses(2, 1.5, 1.0, 2.0).empty());
}

TEST_CASE("concentration exponent fixture") {
  // (d, ptilde, theta, p) = (2, 3/2, 0, 2) gives s = 12/5 exactly.
  CHECK(choose_exponent_s(2.0, 1.5, 0.0, 2) == doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("conjugate exponent identities") {
  double s = 2.4;
  double sc = conjugate_exponent(s);
  CHECK(1.0 / s + 1.0 / sc == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(conjugate_exponent(2.0) == doctest::Approx(2.0));
}

TEST_CASE("stopping exponent fixtures") {
  // (d, s') = (2, 5/3) gives kappa = 1/42 exactly.
  CHECK(choose_kappa(2, 5.0 / 3.0) == doctest::Approx(1.0 / 42.0).epsilon(1e-12));
  // The desk-scale conjugate s' = 12/7 gives kappa = 1/50.
  CHECK(choose_kappa(2, conjugate_exponent(2.4)) == doctest::Approx(0.02).epsilon(1e-12));
  // s' >= d is outside the admissible stopping window.
  CHECK_THROWS(choose_kappa(2, 2.5));
}

TEST_CASE("derived exponent tuple fixture at the desk scale") {
  Exponents ex = derive_exponents(2.0, 1.5, 0.0, 2);
  CHECK(ex.s == doctest::Approx(2.4).epsilon(1e-12));
  CHECK(ex.kappa == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(ex.alpha == doctest::Approx(26.5).epsilon(1e-9));
  CHECK(ex.beta == doctest::Approx(31.176282).epsilon(1e-6));
  CHECK(ex.gamma == doctest::Approx(28.019231).epsilon(1e-6));
  CHECK(ex.zeta == doctest::Approx(58.914263).epsilon(1e-6));
  CHECK(ex.N == 54);
}

TEST_CASE("derived tuples satisfy the full inequality chain") {
  std::vector<std::tuple<double, double, double, int>> cases = {
      {2.0, 1.5, 0.0, 2}, {2.0, 5.0 / 3.0, 0.0, 2}, {2.0, 1.5, 0.1, 3}};
  for (auto [p, pt, th, d] : cases) {
    Exponents ex = derive_exponents(p, pt, th, d);
    auto violations = check_parameters(p, pt, th, d, ex);
    CHECK(violations.empty());
  }
}

TEST_CASE("perturbed tuples are rejected with named inequalities") {
  Exponents ex = derive_exponents(2.0, 1.5, 0.0, 2);
  Exponents bad = ex;
  bad.alpha = 1.0;  // destroys the oscillation dominance inequalities
  auto violations = check_parameters(2.0, 1.5, 0.0, 2, bad);
  CHECK(!violations.empty());
  bad = ex;
  bad.kappa = 0.45;  // stopping exponent far above the admissible window
  CHECK(!check_parameters(2.0, 1.5, 0.0, 2, bad).empty());
}
