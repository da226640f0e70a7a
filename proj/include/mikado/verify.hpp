//==============================================================================
// verify.hpp
// Independent verification layer.  Nothing here reuses the assembly algebra of
// stage.hpp: residuals are evaluated from the weak formulations directly, so a
// sign or bookkeeping error in the construction shows up as a nonzero residual
// rather than cancelling silently.
//
//   * TestFunctionBank: all trigonometric modes |k|_inf <= 2 (cos and sin on a
//     canonical half-lattice), the constant 1, and one off-center bump.
//   * continuity_defect_residual: weak form of d_t rho + div(rho u(Psi)) = div R,
//       <rho(t),phi> - <rho(0),phi> - int <rho u(Psi), grad phi> + int <R, grad phi>,
//     time integrals by trapezoid on the time grid.
//   * ste_weak_residual: weak Ito form of the stochastic transport equation,
//       <rho(t),phi> - <rho(0),phi> - int <rho u, grad phi> ds
//         - sum_i int <rho, d_i phi> dB^i  - (1/2) int <rho, lap phi> ds,
//     with the stochastic integral as a left-point sum on the time grid.
//   * momentum_distance, interpolation_check, nonuniqueness_exhibit.
//==============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "grid.hpp"
#include "stage.hpp"
#include "time_field.hpp"

namespace mikado {

//------------------------------------------------------------------------------
// Test functions.
//------------------------------------------------------------------------------
struct TestFunction {
  std::string name;
  ScalarField phi;
  VectorField grad;
  ScalarField lap;
};

struct TestFunctionBank {
  std::vector<TestFunction> fns;

  static TestFunctionBank make(const GridSpec& g, int kmax = 2) {
    TestFunctionBank bank;
    auto add = [&](std::string name, ScalarField f) {
      TestFunction tf;
      tf.name = std::move(name);
      tf.grad = gradient(f);
      tf.lap = laplacian(f);
      tf.phi = std::move(f);
      bank.fns.push_back(std::move(tf));
    };
    // Constant mode: pairs every residual with mass conservation.
    add("const", ScalarField(g, 1.0));
    // Canonical half of the lattice |k|_inf <= kmax (first nonzero entry > 0)
    // so that cos/sin of k and -k are not duplicated.
    std::vector<int> k(static_cast<size_t>(g.d), -kmax);
    auto advance = [&]() {
      for (int a = 0; a < g.d; ++a) {
        if (++k[static_cast<size_t>(a)] <= kmax) return true;
        k[static_cast<size_t>(a)] = -kmax;
      }
      return false;
    };
    do {
      int lead = 0;
      for (int a = g.d - 1; a >= 0; --a)
        if (k[static_cast<size_t>(a)] != 0) lead = k[static_cast<size_t>(a)];
      if (lead <= 0) continue;  // zero mode and the mirrored half
      std::string tag;
      for (int a = 0; a < g.d; ++a)
        tag += (a ? "," : "") + std::to_string(k[static_cast<size_t>(a)]);
      std::vector<int> kc = k;
      add("cos(" + tag + ")", ScalarField::sample(g, [kc](const std::vector<double>& x) {
            double ph = 0.0;
            for (std::size_t a = 0; a < kc.size(); ++a) ph += kc[a] * x[a];
            return std::cos(kTwoPi * ph);
          }));
      add("sin(" + tag + ")", ScalarField::sample(g, [kc](const std::vector<double>& x) {
            double ph = 0.0;
            for (std::size_t a = 0; a < kc.size(); ++a) ph += kc[a] * x[a];
            return std::sin(kTwoPi * ph);
          }));
    } while (advance());
    // One off-center Gevrey bump: exercises non-sparse spectra.
    add("bump", ScalarField::sample(g, [&g](const std::vector<double>& x) {
          double r2 = 0.0;
          for (int a = 0; a < g.d; ++a) {
            double dx = x[static_cast<size_t>(a)] - (a == 0 ? 0.49 : 0.53);
            dx -= std::round(dx);
            r2 += dx * dx;
          }
          const double R = 0.31;
          double q = r2 / (R * R);
          if (q >= 1.0) return 0.0;
          return std::exp(-4.0 * q / (1.0 - q));
        }));
    return bank;
  }
};

// <f, g> = integral over the unit torus.
inline double inner(const ScalarField& a, const ScalarField& b) {
  return pointwise(a, b).mean();
}
inline double inner(const VectorField& a, const VectorField& b) {
  return dot(a, b).mean();
}

//------------------------------------------------------------------------------
// Weak residual of the continuity-defect equation for one omega sample.
// Returns |<rho(t),phi> - <rho(0),phi> - int <rho u(Psi),grad phi> + int <R,grad phi>|
// for every bank function at once (fields are evaluated once per time step).
//------------------------------------------------------------------------------
inline std::vector<double> continuity_defect_residuals(
    const TimeScalarField& rho, const TimeVectorField& u,
    const TimeVectorField& R, const BrownianPath& path,
    const TestFunctionBank& bank, double t, int n_steps = 0) {
  const GridSpec& g = rho.grid;
  if (u.grid.n != g.n || u.grid.d != g.d || R.grid.n != g.n)
    throw std::invalid_argument("continuity_defect_residuals: grid mismatch");
  // Default to the time grid (n_t nodes, spacing 1/(n_t-1)) so quadrature
  // points coincide with the Brownian path's nodes.
  if (n_steps <= 0) n_steps = g.n_t - 1;
  const bool u_zero = u_field_is_zero(u);
  const std::size_t nf = bank.fns.size();
  std::vector<double> acc(nf, 0.0), prev(nf, 0.0);
  const double dt = t / n_steps;
  for (int k = 0; k <= n_steps; ++k) {
    const double s = k * dt;
    ScalarField rs = rho(s);
    VectorField flux(g);
    bool have_flux = false;
    if (!u_zero) {
      VectorField uPsi = translate(u(s), detail::neg(path.at(s)));
      flux = pointwise(rs, uPsi);
      have_flux = true;
    }
    VectorField Rs = R(s);
    for (std::size_t i = 0; i < nf; ++i) {
      double v = (have_flux ? inner(flux, bank.fns[i].grad) : 0.0) -
                 inner(Rs, bank.fns[i].grad);
      if (k > 0) acc[i] += 0.5 * dt * (prev[i] + v);
      prev[i] = v;
    }
  }
  ScalarField r0 = rho(0.0), rt = rho(t);
  std::vector<double> out(nf, 0.0);
  for (std::size_t i = 0; i < nf; ++i) {
    const double boundary =
        inner(rt, bank.fns[i].phi) - inner(r0, bank.fns[i].phi);
    out[i] = std::abs(boundary - acc[i]);
  }
  return out;
}

inline double continuity_defect_residual(const StageTriple& tr, int omega,
                                         const BrownianPath& path,
                                         const TestFunction& phi, double t,
                                         int n_steps = 0) {
  TestFunctionBank one;
  one.fns.push_back(phi);
  return continuity_defect_residuals(tr.rho[static_cast<size_t>(omega)], tr.u,
                                     tr.R[static_cast<size_t>(omega)], path, one,
                                     t, n_steps)[0];
}

//------------------------------------------------------------------------------
// Weak Ito residual of the stochastic transport equation.  rho_shifted is the
// transferred solution rho = rho_tilde(Psi^{-1}); u is the deterministic drift.
//------------------------------------------------------------------------------
inline std::vector<double> ste_weak_residuals(const TimeScalarField& rho_shifted,
                                              const TimeVectorField& u,
                                              const BrownianPath& path,
                                              const TestFunctionBank& bank,
                                              double t, int n_steps = 0) {
  const GridSpec& g = rho_shifted.grid;
  // Align the Ito sum with the path's nodes (spacing 1/(n_t-1)): sampling the
  // linearly interpolated path off its nodes suppresses quadratic variation
  // and the discrete Ito formula stops converging.
  if (n_steps <= 0) n_steps = g.n_t - 1;
  const bool u_zero = u_field_is_zero(u);
  const std::size_t nf = bank.fns.size();
  std::vector<double> drift_acc(nf, 0.0), heat_acc(nf, 0.0), ito_acc(nf, 0.0);
  std::vector<double> drift_prev(nf, 0.0), heat_prev(nf, 0.0);
  const double dt = t / n_steps;
  for (int k = 0; k <= n_steps; ++k) {
    const double s = k * dt;
    ScalarField rs = rho_shifted(s);
    VectorField flux(g);
    bool have_flux = false;
    if (!u_zero) {
      flux = pointwise(rs, u(s));
      have_flux = true;
    }
    for (std::size_t i = 0; i < nf; ++i) {
      double dv = have_flux ? inner(flux, bank.fns[i].grad) : 0.0;
      double hv = 0.5 * inner(rs, bank.fns[i].lap);
      if (k > 0) {
        drift_acc[i] += 0.5 * dt * (drift_prev[i] + dv);
        heat_acc[i] += 0.5 * dt * (heat_prev[i] + hv);
      }
      drift_prev[i] = dv;
      heat_prev[i] = hv;
    }
    // Left-point Ito increment over [s, s + dt].
    if (k < n_steps) {
      std::vector<double> b0 = path.at(s), b1 = path.at(s + dt);
      for (std::size_t i = 0; i < nf; ++i)
        for (int a = 0; a < g.d; ++a)
          ito_acc[i] += inner(rs, bank.fns[i].grad[a]) *
                        (b1[static_cast<size_t>(a)] - b0[static_cast<size_t>(a)]);
    }
  }
  ScalarField r0 = rho_shifted(0.0), rt = rho_shifted(t);
  std::vector<double> out(nf, 0.0);
  for (std::size_t i = 0; i < nf; ++i)
    out[i] = std::abs(inner(rt, bank.fns[i].phi) - inner(r0, bank.fns[i].phi) -
                      drift_acc[i] - ito_acc[i] - heat_acc[i]);
  return out;
}

inline double ste_weak_residual(const TimeScalarField& rho_shifted,
                                const TimeVectorField& u,
                                const BrownianPath& path,
                                const TestFunction& phi, double t,
                                int n_steps = 0) {
  TestFunctionBank one;
  one.fns.push_back(phi);
  return ste_weak_residuals(rho_shifted, u, path, one, t, n_steps)[0];
}

//------------------------------------------------------------------------------
// Momentum distance between two triples along one path.
//------------------------------------------------------------------------------
inline double momentum_distance(const StageTriple& t0, const StageTriple& t1,
                                int omega, const BrownianPath& path,
                                const std::vector<double>& times) {
  const GridSpec& g = t0.grid;
  if (g.n != t1.grid.n || g.d != t1.grid.d)
    throw std::invalid_argument("momentum_distance: grid mismatch");
  const double tau = std::min(t0.tau[static_cast<size_t>(omega)],
                              t1.tau[static_cast<size_t>(omega)]);
  const bool z0 = u_field_is_zero(t0.u), z1 = u_field_is_zero(t1.u);
  double m = 0.0;
  for (double t : times) {
    if (t > tau + 1e-12) break;
    std::vector<double> shift = detail::neg(path.at(t));
    VectorField m0 = z0 ? VectorField(g)
                        : pointwise(t0.rho[static_cast<size_t>(omega)](t),
                                    translate(t0.u(t), shift));
    VectorField m1 = z1 ? VectorField(g)
                        : pointwise(t1.rho[static_cast<size_t>(omega)](t),
                                    translate(t1.u(t), shift));
    m = std::max(m, lebesgue_norm(m1 - m0, 1.0));
  }
  return m;
}

//------------------------------------------------------------------------------
// Interpolation inequality ||f||_{W^{theta,q}} <= C ||f||_{L^q}^{1-theta}
// ||f||_{W^{1,q}}^theta: empirical constant over an ensemble.
//------------------------------------------------------------------------------
inline double interpolation_ratio(const ScalarField& f, double theta, double q) {
  if (q <= 1.0 || std::isinf(q))
    throw std::invalid_argument("interpolation_ratio: q must lie in (1, inf)");
  if (theta <= 0.0 || theta >= 1.0)
    throw std::invalid_argument("interpolation_ratio: theta must lie in (0, 1)");
  const double lq = lebesgue_norm(f, q);
  const double w1 = lebesgue_norm(f, q) + grad_norm(f, 1, q);
  const double wt = sobolev_norm(f, theta, q);
  return wt / (std::pow(lq, 1.0 - theta) * std::pow(w1, theta));
}

inline double interpolation_check(const GridSpec& g, double theta, double q,
                                  int n_fields, int kmax = 8,
                                  std::uint64_t seed = 0x1317) {
  double c = 0.0;
  for (int i = 0; i < n_fields; ++i) {
    ScalarField f =
        random_band_limited(g, kmax, seed + static_cast<std::uint64_t>(i));
    c = std::max(c, interpolation_ratio(f, theta, q));
  }
  if (!std::isfinite(c))
    throw std::runtime_error("interpolation_check: non-finite ratio");
  return c;
}

//------------------------------------------------------------------------------
// Nonuniqueness certificate: the transferred solution rho = rho_tilde(Psi^{-1})
// against rho' = 0, both with zero initial data and the same drift.
//------------------------------------------------------------------------------
struct NonuniquenessCertificate {
  double rho_initial_sup = 0.0;     // ||rho(0)||_inf across paths
  double final_lp_min = 0.0;        // min over {tau = 1} paths of ||rho(1)||_p
  double tau_one_fraction = 0.0;
  double max_ste_residual = 0.0;    // transferred solution, worst (path, phi)
  double max_ste_residual_zero = 0.0;  // rho' = 0 (exactly zero by linearity)
  double rho_u_l1 = 0.0;            // sup_t ||rho u||_{L^1}: finiteness witness
  bool conclusive = false;
  std::string note;
};

inline NonuniquenessCertificate nonuniqueness_exhibit(
    const StageTriple& final_triple, const std::vector<BrownianPath>& paths,
    double p, const TestFunctionBank& bank, int n_steps = 0,
    double residual_t = 1.0) {
  const GridSpec& g = final_triple.grid;
  NonuniquenessCertificate cert;
  int n_tau_one = 0;
  double final_lp_min = std::numeric_limits<double>::infinity();
  const bool u_zero = u_field_is_zero(final_triple.u);
  for (int w = 0; w < final_triple.n_omega(); ++w) {
    const BrownianPath& path = paths[static_cast<size_t>(w)];
    TimeScalarField rho_tilde = final_triple.rho[static_cast<size_t>(w)];
    TimeScalarField rho_shifted(g, [rho_tilde, path](double t) {
      return translate(rho_tilde(t), path.at(t));
    });
    cert.rho_initial_sup =
        std::max(cert.rho_initial_sup, lebesgue_norm(rho_shifted(0.0), kInf));
    const double tau = final_triple.tau[static_cast<size_t>(w)];
    if (tau >= 1.0 - 1e-12) {
      ++n_tau_one;
      final_lp_min = std::min(final_lp_min, lebesgue_norm(rho_shifted(1.0), p));
      auto res = ste_weak_residuals(rho_shifted, final_triple.u, path, bank,
                                    residual_t, n_steps);
      for (double r : res) cert.max_ste_residual = std::max(cert.max_ste_residual, r);
    }
    for (double t : sampled_times(g.n_t, 9)) {
      if (t > tau + 1e-12) break;
      if (!u_zero)
        cert.rho_u_l1 = std::max(
            cert.rho_u_l1,
            lebesgue_norm(pointwise(rho_shifted(t), final_triple.u(t)), 1.0));
    }
  }
  cert.tau_one_fraction =
      static_cast<double>(n_tau_one) / std::max(1, final_triple.n_omega());
  cert.max_ste_residual_zero = 0.0;  // the zero field solves the equation exactly
  if (n_tau_one == 0) {
    cert.conclusive = false;
    cert.note = "no path reached tau = 1; raise the ensemble size or L";
    cert.final_lp_min = 0.0;
    return cert;
  }
  cert.final_lp_min = final_lp_min;
  cert.conclusive = cert.final_lp_min > 0.0 && cert.rho_initial_sup <= 1e-8;
  cert.note = cert.conclusive
                  ? "distinct solutions with identical zero initial data"
                  : "certificate conditions not met";
  return cert;
}

}  // namespace mikado
