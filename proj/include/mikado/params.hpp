//==============================================================================
// params.hpp
// Exponent and parameter selection for the iteration stage.
//   * choose_exponent_s: picks the Lebesgue exponent s from the feasible
//     interval for 1/s determined by the standing hypotheses
//       1/p + 1/ptilde > 1 + theta/d   and   d/ptilde > 1 + theta,
//     namely 1/s in (max(1 + theta/d - 1/ptilde, 0), min(1/p, 1 - 1/d)),
//     taken at the midpoint.  The result always satisfies s > p and s' < d.
//   * choose_kappa: picks the Hoelder defect kappa so that the growth ratio
//       r(kappa) = (1/2 + kappa) / (1/2 - kappa)
//     sits at the midpoint between 1 and its admissible ceiling d/s'.
//   * choose_parameters: resolves the scaling exponents (alpha, beta, gamma,
//     zeta, N) for the schedule mu = lambda^alpha, nu = lambda^gamma,
//     sigma = lambda^beta, ell = lambda^{-zeta}, taking the midpoint of each
//     feasibility interval in the canonical order (alpha first, then gamma,
//     beta, N, zeta).
//   * check_hypotheses / check_parameters: independent re-verification of
//     every inequality, returning the names of violated conditions.  The
//     checker shares no arithmetic with the constructors beyond the raw
//     inequality statements.
//==============================================================================
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mikado {

//------------------------------------------------------------------------------
// Standing hypotheses on (p, ptilde, theta, d).
//------------------------------------------------------------------------------
inline std::vector<std::string> check_hypotheses(double p, double ptilde,
                                                 double theta, int d) {
  std::vector<std::string> bad;
  if (d < 2) bad.push_back("dimension: d >= 2 required");
  if (!(p >= 1.0)) bad.push_back("integrability: p >= 1 required");
  if (!(ptilde > 1.0)) bad.push_back("integrability: ptilde > 1 required");
  if (!(theta >= 0.0 && theta <= 1.0))
    bad.push_back("smoothness: theta in [0,1] required");
  if (d >= 2 && p >= 1.0 && ptilde >= 1.0 && theta >= 0.0) {
    if (!(1.0 / p + 1.0 / ptilde > 1.0 + theta / d))
      bad.push_back("hypothesis-sum: 1/p + 1/ptilde > 1 + theta/d");
    if (!(static_cast<double>(d) / ptilde > 1.0 + theta))
      bad.push_back("hypothesis-scaling: d/ptilde > 1 + theta");
  }
  return bad;
}

//------------------------------------------------------------------------------
// choose_exponent_s
//------------------------------------------------------------------------------
inline double choose_exponent_s(double p, double ptilde, double theta, int d) {
  auto bad = check_hypotheses(p, ptilde, theta, d);
  if (!bad.empty())
    throw std::invalid_argument("choose_exponent_s: " + bad.front());
  const double lo = std::max(1.0 + theta / d - 1.0 / ptilde, 0.0);
  const double hi = std::min(1.0 / p, 1.0 - 1.0 / d);
  if (!(lo < hi))
    throw std::invalid_argument(
        "choose_exponent_s: empty feasible interval for 1/s");
  const double inv_s = 0.5 * (lo + hi);
  return 1.0 / inv_s;
}

inline double conjugate_exponent(double s) {
  if (!(s > 1.0)) throw std::invalid_argument("conjugate_exponent: s > 1");
  return s / (s - 1.0);
}

//------------------------------------------------------------------------------
// choose_kappa
//------------------------------------------------------------------------------
inline double choose_kappa(int d, double s_conj) {
  if (!(s_conj < static_cast<double>(d)))
    throw std::invalid_argument("choose_kappa: requires s' < d");
  const double bound = static_cast<double>(d) / s_conj;  // r(kappa) must stay below
  const double r = 0.5 * (1.0 + bound);
  // (1/2 + kappa)/(1/2 - kappa) = r  =>  kappa = (r - 1) / (2 (r + 1)).
  return (r - 1.0) / (2.0 * (r + 1.0));
}

//------------------------------------------------------------------------------
// choose_parameters
//------------------------------------------------------------------------------
struct Exponents {
  double s = 0.0;       // concentration exponent
  double kappa = 0.0;   // Hoelder defect
  double alpha = 0.0;   // mu = lambda^alpha
  double beta = 0.0;    // sigma = lambda^beta
  double gamma = 0.0;   // nu = lambda^gamma
  double zeta = 0.0;    // ell = lambda^{-zeta}
  int N = 0;            // antidivergence order

  double s_conj() const { return conjugate_exponent(s); }
};

inline Exponents choose_parameters(double p, double ptilde, double theta, int d,
                                   double s, double kappa) {
  Exponents e;
  e.s = s;
  e.kappa = kappa;
  const double ds_conj = static_cast<double>(d) / conjugate_exponent(s);
  const double holder_coef = (0.5 - kappa) / (0.5 + kappa) * ds_conj;
  // (1) alpha large enough that both gamma-window coefficients clear
  //     alpha + 1 by more than 1; for theta = 0 the first coefficient is
  //     formally infinite and drops.
  double alpha_min = 2.0 / (holder_coef - 1.0);
  double sob_coef = std::numeric_limits<double>::infinity();
  if (theta > 0.0) {
    sob_coef = (d / theta) * (1.0 / s + 1.0 / ptilde - 1.0);
    if (!(sob_coef > 1.0))
      throw std::invalid_argument(
          "choose_parameters: Sobolev coefficient not above 1 (inputs outside "
          "the admissible region)");
    alpha_min = std::max(alpha_min, 2.0 / (sob_coef - 1.0));
  }
  if (!(holder_coef > 1.0))
    throw std::invalid_argument(
        "choose_parameters: Hoelder coefficient not above 1 (kappa too large "
        "for s')");
  e.alpha = alpha_min + 0.5;
  // (2) gamma strictly between alpha + 1 and min(coef) * alpha.
  const double gamma_hi = std::min(sob_coef, holder_coef) * e.alpha;
  const double gamma_lo = e.alpha + 1.0;
  if (!(gamma_lo < gamma_hi))
    throw std::invalid_argument("choose_parameters: empty gamma interval");
  e.gamma = 0.5 * (gamma_lo + gamma_hi);
  // (3) beta strictly between (d/s') alpha and (d/s') alpha + (gamma-alpha-1).
  const double beta_lo = ds_conj * e.alpha;
  const double beta_hi = beta_lo + (e.gamma - e.alpha - 1.0);
  if (!(beta_lo < beta_hi))
    throw std::invalid_argument("choose_parameters: empty beta interval");
  e.beta = 0.5 * (beta_lo + beta_hi);
  // (4) smallest integer N with N/(N-1) < gamma/(1+alpha).
  const double growth = e.gamma / (1.0 + e.alpha);
  if (!(growth > 1.0))
    throw std::invalid_argument("choose_parameters: gamma <= 1 + alpha");
  e.N = static_cast<int>(std::floor(growth / (growth - 1.0))) + 1;
  // (5) zeta strictly between gamma/(1/2-kappa) and (d/s') alpha/(1/2+kappa).
  const double zeta_lo = e.gamma / (0.5 - kappa);
  const double zeta_hi = ds_conj * e.alpha / (0.5 + kappa);
  if (!(zeta_lo < zeta_hi))
    throw std::invalid_argument("choose_parameters: empty zeta interval");
  e.zeta = 0.5 * (zeta_lo + zeta_hi);
  return e;
}

//------------------------------------------------------------------------------
// Independent checker.  Revalidates all seven conditions: the two standing
// hypotheses, the exponent-s window, the kappa ceiling, and the alpha /
// gamma-beta / N / zeta scaling inequalities.  Names of violated conditions
// are returned; an empty vector means fully admissible.
//------------------------------------------------------------------------------
inline std::vector<std::string> check_parameters(double p, double ptilde,
                                                 double theta, int d,
                                                 const Exponents& e) {
  std::vector<std::string> bad = check_hypotheses(p, ptilde, theta, d);
  const double inv_s = 1.0 / e.s;
  if (!(inv_s > std::max(1.0 + theta / d - 1.0 / ptilde, 0.0) &&
        inv_s < std::min(1.0 / p, 1.0 - 1.0 / d)))
    bad.push_back("exponent-s: 1/s outside its feasible window");
  if (!(e.s > p)) bad.push_back("exponent-s: s > p");
  const double s_conj = e.s / (e.s - 1.0);
  if (!(s_conj < d)) bad.push_back("exponent-s: s' < d");
  const double growth_ratio = (0.5 + e.kappa) / (0.5 - e.kappa);
  if (!(e.kappa > 0.0 && growth_ratio < d / s_conj))
    bad.push_back("kappa: r(kappa) below d/s'");
  const double ds_conj = d / s_conj;
  const double holder_coef = (0.5 - e.kappa) / (0.5 + e.kappa) * ds_conj;
  if (!((holder_coef - 1.0) * e.alpha > 2.0))
    bad.push_back("alpha: Hoelder lower bound ((r-ratio) d/s' - 1) alpha > 2");
  double gamma_cap = holder_coef;
  if (theta > 0.0) {
    const double sob_coef = (d / theta) * (1.0 / e.s + 1.0 / ptilde - 1.0);
    if (!((sob_coef - 1.0) * e.alpha > 2.0))
      bad.push_back("alpha: Sobolev lower bound ((d/theta)(...) - 1) alpha > 2");
    gamma_cap = std::min(gamma_cap, sob_coef);
  }
  if (!(e.alpha + 1.0 < e.gamma && e.gamma < gamma_cap * e.alpha))
    bad.push_back("gamma: alpha + 1 < gamma < min-coefficient * alpha");
  if (!(ds_conj * e.alpha < e.beta &&
        e.beta < ds_conj * e.alpha + (e.gamma - e.alpha - 1.0)))
    bad.push_back("beta: (d/s')alpha < beta < (d/s')alpha + (gamma-alpha-1)");
  if (!(e.N >= 2 &&
        static_cast<double>(e.N) / (e.N - 1) < e.gamma / (1.0 + e.alpha)))
    bad.push_back("order-N: N/(N-1) < gamma/(1+alpha)");
  if (!(e.gamma / (0.5 - e.kappa) < e.zeta &&
        e.zeta < ds_conj * e.alpha / (0.5 + e.kappa)))
    bad.push_back("zeta: gamma/(1/2-kappa) < zeta < (d/s')alpha/(1/2+kappa)");
  return bad;
}

// Convenience chain: hypotheses -> s -> kappa -> exponents.
inline Exponents derive_exponents(double p, double ptilde, double theta, int d) {
  const double s = choose_exponent_s(p, ptilde, theta, d);
  const double kappa = choose_kappa(d, conjugate_exponent(s));
  return choose_parameters(p, ptilde, theta, d, s, kappa);
}

}  // namespace mikado
